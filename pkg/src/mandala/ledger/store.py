"""Persistent world state with journaled transactions.

The state is a handful of byte-keyed maps. Writes go to memory immediately and
are recorded in an undo journal; a commit appends the transaction's net writes
to ``wal.log`` as one checksummed record and fsyncs it before the journal is
cleared. Opening a store loads ``snapshot.bin`` and replays the log on top.
"""

from __future__ import annotations

import fcntl
import hashlib
import os
import struct
import zlib
from pathlib import Path

MODULES, NAMES, CELLS, VALS, DEFAULTS, META = range(6)
MAP_NAMES = ("modules", "names", "cells", "vals", "defaults", "meta")
DIGESTED = (MODULES, NAMES, CELLS, VALS, DEFAULTS)  # meta (the tx counter) is not part of the state digest

SNAPSHOT_MAGIC = b"MDLS"
SNAPSHOT_EVERY = 64
CRASH_AFTER_WAL = "MANDALA_CRASH_AFTER_WAL"
CRASH_BEFORE_WAL = "MANDALA_CRASH_BEFORE_WAL"


class StoreCorrupt(Exception):
    pass


class StoreLocked(Exception):
    pass


def _digest_maps(maps: dict) -> bytes:
    h = hashlib.sha256(b"mandala-state-v1")
    for m in DIGESTED:
        entries = maps[m]
        h.update(struct.pack("<BI", m, len(entries)))
        for k in sorted(entries):
            v = entries[k]
            h.update(struct.pack("<I", len(k)) + k + struct.pack("<I", len(v)) + v)
    return h.digest()


GENESIS_DIGEST = _digest_maps({m: {} for m in range(6)})


def _encode_puts(puts) -> bytes:
    out = [struct.pack("<I", len(puts))]
    for m, k, v in puts:
        out.append(struct.pack("<BH", m, len(k)) + k)
        if v is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01" + struct.pack("<I", len(v)) + v)
    return b"".join(out)


def _decode_puts(data: bytes) -> list:
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise StoreCorrupt("record payload truncated")
        b = data[pos : pos + n]
        pos += n
        return b

    (count,) = struct.unpack("<I", take(4))
    puts = []
    for _ in range(count):
        m, klen = struct.unpack("<BH", take(3))
        if m >= len(MAP_NAMES):
            raise StoreCorrupt(f"unknown map {m}")
        k = take(klen)
        flag = take(1)[0]
        if flag == 0:
            v = None
        elif flag == 1:
            (vlen,) = struct.unpack("<I", take(4))
            v = take(vlen)
        else:
            raise StoreCorrupt("bad presence flag")
        puts.append((m, k, v))
    if pos != len(data):
        raise StoreCorrupt("trailing bytes in record")
    return puts


def _frame(payload: bytes) -> bytes:
    return struct.pack("<II", len(payload), zlib.crc32(payload)) + payload


class Store:
    """One ledger directory. Only one process may hold it open (``LOCK`` is flocked)."""

    def __init__(self, path, snapshot_every: int = SNAPSHOT_EVERY):
        self.path = Path(path) if path is not None else None
        self.snapshot_every = snapshot_every
        self.maps: dict = {m: {} for m in range(6)}
        self._undo: list | None = None
        self._records = 0
        self._lock_fd = None
        self._wal = None
        self.listeners: list = []

    # ---- lifecycle ----------------------------------------------------------------------

    @classmethod
    def open(cls, path, **kw) -> "Store":
        s = cls(path, **kw)
        s._open()
        return s

    @classmethod
    def memory(cls) -> "Store":
        """A store with no directory behind it; commits are kept in memory only."""
        return cls(None)

    def _open(self):
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / "modules").mkdir(exist_ok=True)
        fd = os.open(self.path / "LOCK", os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            os.close(fd)
            raise StoreLocked(f"{self.path} is in use by another process") from None
        self._lock_fd = fd
        try:
            self._load_snapshot()
            self._replay_wal()
            self._check_module_files()
        except Exception:
            self.close()
            raise
        self._wal = open(self.path / "wal.log", "ab")

    def close(self):
        if self._wal is not None:
            self._wal.close()
            self._wal = None
        if self._lock_fd is not None:
            fcntl.flock(self._lock_fd, fcntl.LOCK_UN)
            os.close(self._lock_fd)
            self._lock_fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _apply(self, puts):
        for m, k, v in puts:
            if v is None:
                self.maps[m].pop(k, None)
            else:
                self.maps[m][k] = v

    def _load_snapshot(self):
        p = self.path / "snapshot.bin"
        if not p.exists():
            return
        data = p.read_bytes()
        if len(data) < 8 or data[:4] != SNAPSHOT_MAGIC:
            raise StoreCorrupt("snapshot header damaged")
        (crc,) = struct.unpack("<I", data[4:8])
        if zlib.crc32(data[8:]) != crc:
            raise StoreCorrupt("snapshot checksum mismatch")
        self._apply(_decode_puts(data[8:]))

    def _replay_wal(self):
        p = self.path / "wal.log"
        if not p.exists():
            return
        data = p.read_bytes()
        pos = 0
        while pos < len(data):
            if pos + 8 > len(data):
                raise StoreCorrupt(f"wal.log truncated at byte {pos}")
            length, crc = struct.unpack("<II", data[pos : pos + 8])
            payload = data[pos + 8 : pos + 8 + length]
            if len(payload) != length:
                raise StoreCorrupt(f"wal.log record at byte {pos} truncated")
            if zlib.crc32(payload) != crc:
                raise StoreCorrupt(f"wal.log record at byte {pos} fails its checksum")
            self._apply(_decode_puts(payload))
            self._records += 1
            pos += 8 + length

    def _check_module_files(self):
        for f in (self.path / "modules").glob("*.mdlc"):
            if hashlib.sha256(f.read_bytes()).hexdigest() != f.stem:
                raise StoreCorrupt(f"module file {f.name} does not match its address")

    # ---- transactions ---------------------------------------------------------------------

    @property
    def in_tx(self) -> bool:
        return self._undo is not None

    def begin(self):
        if self._undo is not None:
            raise RuntimeError("transaction already open")
        self._undo = []

    def mark(self) -> int:
        return len(self._undo)

    def rollback_to(self, mark: int):
        while len(self._undo) > mark:
            m, k, old = self._undo.pop()
            if old is None:
                self.maps[m].pop(k, None)
            else:
                self.maps[m][k] = old

    def put(self, m: int, key: bytes, value: bytes | None):
        if self._undo is None:
            raise RuntimeError("write outside a transaction")
        self._undo.append((m, key, self.maps[m].get(key)))
        if value is None:
            self.maps[m].pop(key, None)
        else:
            self.maps[m][key] = value

    def get(self, m: int, key: bytes):
        return self.maps[m].get(key)

    def abort(self):
        self.rollback_to(0)
        self._undo = None

    def commit(self):
        touched = []
        seen = set()
        for m, k, _ in self._undo:
            if (m, k) not in seen:
                seen.add((m, k))
                touched.append((m, k))
        puts = [(m, k, self.maps[m].get(k)) for m, k in sorted(touched)]
        if puts and self.path is not None:
            if os.environ.get(CRASH_BEFORE_WAL):
                os._exit(86)
            self._wal.write(_frame(_encode_puts(puts)))
            self._wal.flush()
            os.fsync(self._wal.fileno())
            if os.environ.get(CRASH_AFTER_WAL):
                os._exit(87)
            self._records += 1
        self._undo = None
        for fn in self.listeners:
            fn(puts)
        if self.path is not None and self._records >= self.snapshot_every:
            self.snapshot()

    def snapshot(self):
        """Write the full state to ``snapshot.bin`` and start a fresh log."""
        puts = [(m, k, v) for m in range(6) for k, v in sorted(self.maps[m].items())]
        payload = _encode_puts(puts)
        tmp = self.path / "snapshot.bin.tmp"
        with open(tmp, "wb") as f:
            f.write(SNAPSHOT_MAGIC + struct.pack("<I", zlib.crc32(payload)) + payload)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self.path / "snapshot.bin")
        self._wal.close()
        self._wal = open(self.path / "wal.log", "wb")
        os.fsync(self._wal.fileno())
        self._records = 0

    # ---- derived views ----------------------------------------------------------------------

    def digest(self) -> bytes:
        return _digest_maps(self.maps)

    def write_file(self, rel: str, data: bytes):
        p = self.path / rel
        tmp = p.with_name(p.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, p)
