"""
Utility module for the on-disk result cache.

Each entry is one file named by the SHA-256 of its key (curve
coefficients, module, parameters). A file starts with the magic bytes
b"ELAB" and a 2-byte big-endian format version, followed by the payload as
UTF-8 JSON with sorted keys. Entries of another version, or files that do
not parse, are ignored.
"""

import hashlib
import json
import logging
import os
import struct
import tempfile
from typing import Any, Optional, Sequence

from ellab.constants import CACHE_DIR, CACHE_FORMAT_VERSION, CACHE_MAGIC

logger = logging.getLogger("cache_utils")

_HEADER = struct.Struct(">4sH")


def cache_key(parts: Sequence[Any]) -> str:
    """Hex SHA-256 of the key tuple."""
    encoded = json.dumps(list(parts), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()


def cache_path(parts: Sequence[Any], cache_dir: Optional[str] = None) -> str:
    return os.path.join(cache_dir or CACHE_DIR, f"{cache_key(parts)}.elab")


def encode_entry(parts: Sequence[Any], payload: Any, version: int = CACHE_FORMAT_VERSION) -> bytes:
    body = json.dumps({"key": list(parts), "payload": payload}, sort_keys=True, separators=(",", ":"))
    return _HEADER.pack(CACHE_MAGIC, version) + body.encode("utf-8")


def decode_entry(data: bytes, parts: Sequence[Any]) -> Optional[Any]:
    """Payload of a cache file, or None when the header, version or key do not match."""
    if len(data) < _HEADER.size:
        return None
    magic, version = _HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        logger.warning("ignoring cache entry with a foreign header")
        return None
    if version != CACHE_FORMAT_VERSION:
        logger.info(f"ignoring cache entry of format version {version}")
        return None
    try:
        document = json.loads(data[_HEADER.size:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        logger.warning(f"ignoring corrupt cache entry: {str(e)}")
        return None
    if document.get("key") != json.loads(json.dumps(list(parts))):
        return None
    return document.get("payload")


def read_cache(parts: Sequence[Any], cache_dir: Optional[str] = None) -> Optional[Any]:
    """
    Look up a cache entry.

    Args:
        parts: key tuple (JSON-serializable)
        cache_dir: directory of the cache, defaults to the configured one

    Returns:
        The stored payload, or None on a miss
    """
    path = cache_path(parts, cache_dir)
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError:
        return None
    except OSError as e:
        logger.warning(f"cannot read cache entry {path}: {str(e)}")
        return None
    payload = decode_entry(data, parts)
    if payload is not None:
        logger.debug(f"cache hit {os.path.basename(path)}")
    return payload


def write_cache(parts: Sequence[Any], payload: Any, cache_dir: Optional[str] = None) -> Optional[str]:
    """Store a payload atomically; returns the file path, or None if the cache is not writable."""
    directory = cache_dir or CACHE_DIR
    path = cache_path(parts, directory)
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        with os.fdopen(fd, "wb") as f:
            f.write(encode_entry(parts, payload))
        os.replace(tmp, path)
    except OSError as e:
        logger.warning(f"cannot write cache entry {path}: {str(e)}")
        return None
    logger.debug(f"cache store {os.path.basename(path)}")
    return path
