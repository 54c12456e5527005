"""Problem files, run configs, bundled data and run records."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .pauli import PauliParseError, PauliSum, parse_term_line
from .simulator import BasisFlip, Circuit


class ConfigError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass
class ProblemFile:
    """A qubit Hamiltonian plus ``# key: value`` metadata."""

    hamiltonian: PauliSum
    n_qubits: int
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.hamiltonian.is_hermitian():
            raise DimensionError("problem Hamiltonian is not hermitian")
        if self.hamiltonian.max_qubit() >= self.n_qubits:
            raise DimensionError(
                f"Hamiltonian acts on qubit {self.hamiltonian.max_qubit()} but n_qubits is {self.n_qubits}"
            )

    @classmethod
    def from_text(cls, text: str) -> ProblemFile:
        meta: dict[str, str] = {}
        terms = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition(":")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            terms.append(parse_term_line(line, lineno))
        ham = PauliSum(terms)
        if "n_qubits" in meta:
            try:
                n = int(meta["n_qubits"])
            except ValueError:
                raise PauliParseError(f"bad n_qubits {meta['n_qubits']!r}") from None
        else:
            n = ham.max_qubit() + 1
            meta["n_qubits"] = str(n)
        return cls(ham, n, meta)

    def to_text(self) -> str:
        meta = dict(self.metadata)
        meta["n_qubits"] = str(self.n_qubits)
        head = "".join(f"# {k}: {v}\n" for k, v in meta.items())
        return head + self.hamiltonian.to_text()

    @property
    def hf_occupied(self) -> list[int] | None:
        raw = self.metadata.get("hf_occupied")
        return [int(t) for t in raw.split()] if raw else None

    def meta_float(self, key: str) -> float | None:
        raw = self.metadata.get(key)
        return float(raw) if raw is not None else None

    def reference_circuit(self) -> Circuit:
        occ = self.hf_occupied or []
        return Circuit(tuple(BasisFlip(q) for q in occ), self.n_qubits)


def bundled_names() -> list[str]:
    root = resources.files("fermigrad") / "data"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ham"))


def bundled_text(name: str) -> str:
    return (resources.files("fermigrad") / "data" / f"{name}.ham").read_text()


def load_problem(source: str | Path) -> ProblemFile:
    """Load a problem from a path, or by bundled name (e.g. ``h2_sto3g_0.7414``)."""
    path = Path(source)
    if path.exists():
        return ProblemFile.from_text(path.read_text())
    name = str(source)
    if name in bundled_names():
        return ProblemFile.from_text(bundled_text(name))
    raise FileNotFoundError(f"no problem file or bundled problem named {name!r}")


def load_circuit(path: str | Path, n_qubits: int = 0) -> Circuit:
    return Circuit.from_text(Path(path).read_text(), n_qubits)


def load_config(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(data).__name__}")
    return data


def _clean(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return repr(obj)
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def record_json(record: dict[str, Any]) -> str:
    return json.dumps(_clean(record), indent=2) + "\n"


def rows_to_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    return buf.getvalue()
