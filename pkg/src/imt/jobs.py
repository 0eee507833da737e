"""Job specifications and the cached form -> Theta -> report pipeline."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .errors import OutOfRange
from .forms import FormDescriptor, StageError, atomic_write, normalized_symbol, slope_of

log = logging.getLogger(__name__)

DESK_PRIMES = (3, 5, 7, 11)
MAX_NMAX = 4
MAX_LEVEL = 64
MAX_WEIGHT = 52


@dataclass
class JobSpec:
    p: int = 5
    labels: list[str] = field(default_factory=list)
    prime_index: int | None = None
    i: int = 0
    j: int = 0
    nmax: int = 3
    precision: int = 30
    trunc: int | None = None
    fmt: str = "text"
    deep: bool = False
    cache_dir: str | None = None

    def validate(self, forms: list[FormDescriptor] = ()) -> "JobSpec":
        """Desk-scale guards; level 4 needs ``deep`` (p^5-element group rings)."""
        if self.p not in DESK_PRIMES:
            raise OutOfRange(f"p = {self.p} is outside the desk-scale set {DESK_PRIMES}")
        if not 0 <= self.nmax <= MAX_NMAX:
            raise OutOfRange(f"nmax must lie in 0..{MAX_NMAX}")
        if self.nmax == MAX_NMAX and not self.deep:
            raise OutOfRange(f"nmax = {MAX_NMAX} is gated behind --deep")
        if not 0 <= self.j:
            raise OutOfRange("j must be non-negative")
        for d in forms:
            if d.N > MAX_LEVEL or d.k > MAX_WEIGHT:
                raise OutOfRange(f"{d.label}: N <= {MAX_LEVEL} and k <= {MAX_WEIGHT} required")
            if self.j > d.k - 2:
                raise OutOfRange(f"{d.label}: j must lie in 0..k-2")
        return self


def _theta_key(desc: FormDescriptor, p: int, prime_index: int, i: int, j: int, n: int, precision: int) -> str:
    blob = json.dumps(
        {"form": [desc.N, desc.k, desc.flavor, desc.disc, desc.selector()["traces"], desc.degree], "p": p, "idx": prime_index, "i": i, "j": j, "n": n, "M": precision, "v": __version__},
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


class FormRun:
    """A form normalized at one prime, with Theta elements cached on disk."""

    def __init__(self, desc: FormDescriptor, job: JobSpec):
        self.desc = desc
        self.job = job
        self.p = job.p
        self.prime_index = desc.prime_index(job.p, job.prime_index)
        self._sym = None
        self._thetas: dict[tuple[int, int], object] = {}

    @property
    def sym(self):
        if self._sym is None:
            self._sym = normalized_symbol(self.desc, self.p, self.prime_index, self.job.i, self.job.precision, self.job.cache_dir)
        return self._sym

    def slope(self):
        return slope_of(self.sym, self.p)

    def theta(self, n: int, j: int | None = None):
        from .mazurtate import ThetaElement, theta

        j = self.job.j if j is None else j
        if (n, j) in self._thetas:
            return self._thetas[n, j]
        path = None
        if self.job.cache_dir:
            key = _theta_key(self.desc, self.p, self.prime_index, self.job.i, j, n, self.job.precision)
            path = Path(self.job.cache_dir) / f"theta-{key}.json"
            if path.exists():
                try:
                    th = ThetaElement.from_json(json.loads(path.read_text()))
                    self._thetas[n, j] = th
                    return th
                except (ValueError, KeyError) as exc:
                    log.warning("recomputing %s: %s", path, exc)
        try:
            th = theta(self.sym, n, j, self.job.i)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(f"theta n={n}", self.desc.label, exc) from exc
        th.label = self.desc.label
        if path is not None:
            atomic_write(path, json.dumps(th.to_json(), sort_keys=True))
        self._thetas[n, j] = th
        return th

    def thetas(self, nmax: int | None = None) -> dict[int, object]:
        nmax = self.job.nmax if nmax is None else nmax
        return {n: self.theta(n) for n in range(nmax + 1)}

    def series(self) -> list[tuple[int, object, object]]:
        out = []
        for n, th in self.thetas().items():
            try:
                inv = th.invariants()
            except Exception as exc:
                raise StageError(f"invariants n={n}", self.desc.label, exc) from exc
            out.append((n, inv.mu, inv.lam))
        return out

    def report(self):
        from .analysis import extract_signed
        from .errors import InsufficientData

        series = self.series()
        min_points = 2 if self.job.nmax >= 3 else 1
        try:
            rep = extract_signed(series, self.desc.k, self.p, self.desc.label, self.prime_index, self.job.i, self.job.j, min_points=min_points)
        except InsufficientData as exc:
            raise StageError("signed", self.desc.label, exc) from exc
        rep.extra["min_points"] = min_points
        return rep

    def a_p_int(self) -> int:
        """a_p as an integer; the logarithmic matrix needs rational a_p."""
        if self.desc.degree != 1:
            raise OutOfRange(f"{self.desc.label}: the C-matrix path needs a rational a_p")
        val = self.sym.eigenvalues[self.p][0]
        return int(Fraction(val))

    def eps_p(self) -> int:
        if self.desc.flavor != "gamma0":
            raise OutOfRange("nebentype value needs a Gamma_0(N, chi) space")
        return self.sym.character_value(self.p)


def slope_str(x) -> str:
    if x == float("inf"):
        return "inf"
    return str(x)


def report_json(obj) -> str:
    """Deterministic JSON used for every machine-readable artifact."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, default=_default) + "\n"


def _clean(x):
    if isinstance(x, float) and x == float("inf"):
        return "inf"
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "to_json"):
        return _clean(x.to_json())
    if hasattr(x, "__dataclass_fields__"):
        return _clean(asdict(x))
    return x


def _default(x):
    if isinstance(x, Fraction):
        return str(x)
    if x == float("inf"):
        return "inf"
    if hasattr(x, "to_json"):
        return x.to_json()
    if hasattr(x, "__dataclass_fields__"):
        return asdict(x)
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    return str(x)
