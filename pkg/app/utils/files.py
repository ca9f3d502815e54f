"""File helpers shared by the stages: word lists, hashing, deterministic writes"""
import hashlib
from pathlib import Path
from typing import Iterable, List, Union

PathLike = Union[str, Path]

RESOURCE_DIR = Path(__file__).resolve().parent.parent / "resources"


def resource_path(name: str) -> Path:
    """Path of a bundled default resource file"""
    return RESOURCE_DIR / name


def read_word_list(path: PathLike) -> List[str]:
    """Read one entry per line, skipping blank lines and '#' comments"""
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                entries.append(line)
    return entries


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_bytes(path: PathLike, data: bytes) -> Path:
    """Write an artifact, creating parent directories"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return path


def write_text(path: PathLike, text: str) -> Path:
    # newline="" keeps line endings byte-identical across platforms
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return path


def write_lines(path: PathLike, lines: Iterable[str]) -> Path:
    return write_text(path, "".join(f"{line}\n" for line in lines))
