#!/usr/bin/env python3
"""
Script to write the bundled 20-article fixture (corpus, KB files, gold corpora, config)
Run the pipeline on it afterwards with:
    python -m app.main pipeline --config data/sample/pipeline.env
"""

import sys
import os
from pathlib import Path

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.services.sample_data import write_sample_fixture


def main():
    """Main function"""
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/sample")
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 42
    config_path = write_sample_fixture(root, seed=seed)
    print(f"Sample fixture written to: {root}")
    print(f"Config: {config_path}")


if __name__ == "__main__":
    main()
