"""Checkpoint files, CSV logs, and hashing shared by the training loops."""

from __future__ import annotations

import hashlib
import os
from typing import Optional

import numpy as np
import torch


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_checkpoint(path: str, payload: dict) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str) -> dict:
    # Everything we store is tensors plus plain containers, so the restricted
    # unpickler suffices.
    return torch.load(path, map_location="cpu", weights_only=True)


def rng_snapshot(rng: np.random.Generator) -> dict:
    return {"numpy": rng.bit_generator.state, "torch": torch.get_rng_state()}


def rng_restore(snapshot: dict) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = snapshot["numpy"]
    torch.set_rng_state(snapshot["torch"].cpu() if isinstance(snapshot["torch"], torch.Tensor)
                        else torch.tensor(snapshot["torch"], dtype=torch.uint8))
    return rng


class CsvLogger:
    """Append-only CSV with immediate flush so crashes keep their history."""

    def __init__(self, path: str, header: str, append: bool = False):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        self.path = path
        exists = os.path.exists(path)
        self._fh = open(path, "a" if append else "w")
        if not append or not exists:
            self._fh.write(header + "\n")
            self._fh.flush()

    def write(self, row: str):
        self._fh.write(row + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_csv_rows(path: str) -> list[dict[str, str]]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        return []
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def truncate_csv_after(path: str, last_step: int):
    """Drop rows logged past a checkpoint so a resumed run never duplicates."""
    if not os.path.exists(path):
        return
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        return
    kept = [lines[0]]
    for line in lines[1:]:
        cell = line.split(",", 1)[0].strip()
        if cell.isdigit() and int(cell) <= last_step:
            kept.append(line)
    with open(path, "w") as fh:
        fh.writelines(kept)


def dump_abort(out_dir: str, step: int, tensors: dict, note: str) -> str:
    """Persist the offending batch next to the run for post-mortems."""
    path = os.path.join(out_dir, f"nan_dump_step{step}.pt")
    payload = {"step": step, "note": note}
    for key, value in tensors.items():
        payload[key] = value.detach().cpu() if isinstance(value, torch.Tensor) else value
    save_checkpoint(path, payload)
    return path


def latest_checkpoint(out_dir: str, prefix: str) -> Optional[str]:
    if not os.path.isdir(out_dir):
        return None
    best: tuple[int, str] | None = None
    for name in os.listdir(out_dir):
        if name.startswith(prefix) and name.endswith(".pt"):
            stem = name[len(prefix):-3].strip("_")
            if stem.isdigit() and (best is None or int(stem) > best[0]):
                best = (int(stem), name)
    return os.path.join(out_dir, best[1]) if best else None
