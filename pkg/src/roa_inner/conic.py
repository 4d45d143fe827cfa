"""Standard-form conic programs shared by the relaxation builders and the solvers.

    minimize (or maximize)  c @ x + offset
    subject to              A @ x == b
                            x = (free | nonneg | vech(X_1) | ... | vech(X_p)),  X_j PSD

PSD blocks occupy one column per upper-triangular entry ``(i, j), i <= j`` in
row-major order; a coefficient ``a`` in such a column contributes ``a * X_ij``
(so an off-diagonal entry that should count twice carries ``2``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


def tri_size(n: int) -> int:
    return n * (n + 1) // 2


def tri_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n)


def vech_to_mat(v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    iu = np.triu_indices(n)
    out[iu] = v
    out.T[iu] = v
    return out


def mat_to_vech(m: np.ndarray) -> np.ndarray:
    return m[np.triu_indices(m.shape[0])]


@dataclass
class ConicProgram:
    n_free: int
    n_nonneg: int
    psd_orders: list[int]
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    sense: str = "min"
    offset: float = 0.0
    groups: dict[str, tuple[int, int]] = field(default_factory=dict)
    blocks: dict[str, int] = field(default_factory=dict)
    row_groups: dict[str, tuple[int, int]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if any(n < 1 for n in self.psd_orders):
            raise ValueError("PSD block orders must be >= 1")
        if self.A.shape != (len(self.b), self.n_vars):
            raise ValueError(f"A has shape {self.A.shape}, expected {(len(self.b), self.n_vars)}")
        if len(self.c) != self.n_vars:
            raise ValueError("objective length does not match variable count")

    @property
    def n_rows(self) -> int:
        return len(self.b)

    @property
    def n_vars(self) -> int:
        return self.n_free + self.n_nonneg + sum(tri_size(n) for n in self.psd_orders)

    def block_offsets(self) -> list[int]:
        offs, pos = [], self.n_free + self.n_nonneg
        for n in self.psd_orders:
            offs.append(pos)
            pos += tri_size(n)
        return offs

    def block_matrix(self, x: np.ndarray, j: int) -> np.ndarray:
        n = self.psd_orders[j]
        off = self.block_offsets()[j]
        return vech_to_mat(x[off : off + tri_size(n)], n)

    def group(self, x: np.ndarray, name: str) -> np.ndarray:
        lo, hi = self.groups[name]
        return x[lo:hi]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.offset

    def summary(self) -> str:
        return (
            f"{self.sense} over {self.n_vars} columns: {self.n_free} free, {self.n_nonneg} nonneg, "
            f"{len(self.psd_orders)} PSD blocks (max order {max(self.psd_orders, default=0)}), "
            f"{self.n_rows} equality rows"
        )


class ProgramBuilder:
    """Incremental assembly of a :class:`ConicProgram`.

    Free variables are declared first, then PSD blocks; columns are final
    only after :meth:`build`, so PSD columns are tracked symbolically as
    ``('psd', block, i, j)`` until then.
    """

    def __init__(self):
        self._n_free = 0
        self._groups: dict[str, tuple[int, int]] = {}
        self._psd: list[int] = []
        self._blocks: dict[str, int] = {}
        self._rows: list[tuple[dict, float]] = []
        self._row_groups: dict[str, tuple[int, int]] = {}
        self._obj: dict = {}

    def add_free(self, name: str, size: int) -> list:
        start = self._n_free
        self._n_free += size
        self._groups[name] = (start, start + size)
        return [("free", start + i) for i in range(size)]

    def add_psd(self, name: str, order: int) -> int:
        if order < 1:
            raise ValueError(f"PSD block {name!r} would be empty")
        self._psd.append(order)
        self._blocks[name] = len(self._psd) - 1
        return len(self._psd) - 1

    def add_row(self, coefs: dict, rhs: float):
        self._rows.append((coefs, float(rhs)))

    def begin_rows(self, name: str):
        self._current = (name, len(self._rows))

    def end_rows(self):
        name, start = self._current
        self._row_groups[name] = (start, len(self._rows))

    def set_objective(self, coefs: dict):
        self._obj = dict(coefs)

    def build(self, sense: str = "min", offset: float = 0.0) -> ConicProgram:
        nf = self._n_free
        offs, pos = [], nf
        for n in self._psd:
            offs.append(pos)
            pos += tri_size(n)

        def col(key) -> int:
            if key[0] == "free":
                return key[1]
            _, blk, i, j = key
            n = self._psd[blk]
            if i > j:
                i, j = j, i
            return offs[blk] + i * n - i * (i - 1) // 2 + (j - i)

        rows, cols, vals, rhs = [], [], [], []
        for r, (coefs, bval) in enumerate(self._rows):
            for key, v in coefs.items():
                if v != 0.0:
                    rows.append(r)
                    cols.append(col(key))
                    vals.append(v)
            rhs.append(bval)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self._rows), pos))
        A.sum_duplicates()
        c = np.zeros(pos)
        for key, v in self._obj.items():
            c[col(key)] += v
        groups = dict(self._groups)
        return ConicProgram(
            n_free=nf,
            n_nonneg=0,
            psd_orders=list(self._psd),
            A=A,
            b=np.array(rhs),
            c=c,
            sense=sense,
            offset=offset,
            groups=groups,
            blocks=dict(self._blocks),
            row_groups=dict(self._row_groups),
        )


# ---------------------------------------------------------------------------
# text dump: a small sparse conic format for cross-checking with external tools
#
#   # comment lines
#   SENSE min|max
#   OFFSET <float>
#   FREE <n>
#   NONNEG <n>
#   PSD <k> <n_1> ... <n_k>
#   ROWS <m>
#   OBJ <col> <val>            (one line per nonzero of c)
#   RHS <row> <val>            (one line per nonzero of b)
#   A <row> <col> <val>        (one line per nonzero of A)
#
# Columns follow the layout documented at the top of this module.


def dump_program(p: ConicProgram, path) -> None:
    A = p.A.tocoo()
    with open(path, "w") as fh:
        fh.write("# roa_inner conic program: min/max c.x s.t. A x = b, x in free x nonneg x PSD(vech)\n")
        fh.write(f"SENSE {p.sense}\nOFFSET {float(p.offset)!r}\nFREE {p.n_free}\nNONNEG {p.n_nonneg}\n")
        fh.write("PSD " + " ".join(str(v) for v in [len(p.psd_orders), *p.psd_orders]) + "\n")
        fh.write(f"ROWS {p.n_rows}\n")
        for j in np.flatnonzero(p.c):
            fh.write(f"OBJ {j} {float(p.c[j])!r}\n")
        for i in np.flatnonzero(p.b):
            fh.write(f"RHS {i} {float(p.b[i])!r}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"A {i} {j} {float(v)!r}\n")


def load_program(path) -> ConicProgram:
    header: dict = {}
    obj, rhs, trip = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tag, *rest = line.split()
            if tag == "OBJ":
                obj.append((int(rest[0]), float(rest[1])))
            elif tag == "RHS":
                rhs.append((int(rest[0]), float(rest[1])))
            elif tag == "A":
                trip.append((int(rest[0]), int(rest[1]), float(rest[2])))
            elif tag == "PSD":
                header["PSD"] = [int(v) for v in rest[1:]]
            elif tag == "SENSE":
                header["SENSE"] = rest[0]
            elif tag == "OFFSET":
                header["OFFSET"] = float(rest[0])
            else:
                header[tag] = int(rest[0])
    nf, nl, psd, m = header["FREE"], header["NONNEG"], header["PSD"], header["ROWS"]
    nvar = nf + nl + sum(tri_size(n) for n in psd)
    c = np.zeros(nvar)
    for j, v in obj:
        c[j] = v
    b = np.zeros(m)
    for i, v in rhs:
        b[i] = v
    if trip:
        r, cidx, vals = zip(*trip)
    else:
        r, cidx, vals = (), (), ()
    A = sp.csr_matrix((vals, (r, cidx)), shape=(m, nvar))
    return ConicProgram(nf, nl, psd, A, b, c, sense=header["SENSE"], offset=header.get("OFFSET", 0.0))
