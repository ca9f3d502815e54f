"""ユーティリティモジュール"""