"""Form descriptors, the fixture pack, the LMFDB client and the per-form pipeline."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import ImtError, NotFound, SchemaMismatch

log = logging.getLogger(__name__)

FIXTURE_VERSION = 1
LMFDB_URL = "https://www.lmfdb.org/api/mf_newforms/"


@dataclass
class FormDescriptor:
    """What is needed to locate a newform orbit in a locally built space.

    ``traces`` maps a prime ell to the trace of a_ell over the Hecke field;
    ``primes`` maps p to the primes above p as {"index", "slope"} records in
    our factor order, with ``default_prime`` picking one per p.
    """

    label: str
    N: int
    k: int
    flavor: str = "gamma0"
    disc: int = 1
    degree: int = 1
    minpoly: list[int] | None = None
    traces: dict[int, str] = field(default_factory=dict)
    a_ell: dict[int, list[str]] = field(default_factory=dict)
    aliases: list[str] = field(default_factory=list)
    lmfdb_label: str | None = None
    primes: dict[int, list[dict]] = field(default_factory=dict)
    default_prime: dict[int, int] = field(default_factory=dict)
    source: str = "fixture"

    def selector(self) -> dict:
        return {"degree": self.degree, "traces": {int(ell): tr for ell, tr in self.traces.items()}}

    def prime_index(self, p: int, override: int | None = None) -> int:
        if override is not None:
            return override
        return self.default_prime.get(p, 1)

    def to_json(self) -> dict:
        out = asdict(self)
        out["traces"] = {str(ell): str(tr) for ell, tr in self.traces.items()}
        out["a_ell"] = {str(ell): [str(c) for c in v] for ell, v in self.a_ell.items()}
        out["primes"] = {str(p): v for p, v in self.primes.items()}
        out["default_prime"] = {str(p): v for p, v in self.default_prime.items()}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "FormDescriptor":
        required = {"label", "N", "k"}
        if not required <= set(data):
            raise SchemaMismatch(f"descriptor lacks {sorted(required - set(data))}")
        d = dict(data)
        d["traces"] = {int(ell): str(tr) for ell, tr in d.get("traces", {}).items()}
        d["a_ell"] = {int(ell): [str(c) for c in v] for ell, v in d.get("a_ell", {}).items()}
        d["primes"] = {int(p): v for p, v in d.get("primes", {}).items()}
        d["default_prime"] = {int(p): int(v) for p, v in d.get("default_prime", {}).items()}
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{key: val for key, val in d.items() if key in known})


# ---------------------------------------------------------------------------
# fixtures


def default_fixture_path() -> Path:
    return Path(str(resources.files("imt") / "data" / "forms.json"))


def load_fixtures(path: str | os.PathLike | None = None) -> dict[str, FormDescriptor]:
    """Descriptors keyed by label and by every alias."""
    path = Path(path) if path else default_fixture_path()
    with open(path) as fh:
        data = json.load(fh)
    if data.get("version") != FIXTURE_VERSION:
        raise SchemaMismatch(f"fixture version {data.get('version')} != {FIXTURE_VERSION}")
    out: dict[str, FormDescriptor] = {}
    for raw in data["forms"]:
        desc = FormDescriptor.from_json(raw)
        for key in [desc.label, *desc.aliases, desc.lmfdb_label]:
            if key:
                out[key] = desc
    return out


def save_fixtures(descs: list[FormDescriptor], path: str | os.PathLike) -> None:
    payload = {"version": FIXTURE_VERSION, "forms": [d.to_json() for d in descs]}
    atomic_write(Path(path), json.dumps(payload, indent=1, sort_keys=True) + "\n")


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# LMFDB


class LMFDBClient:
    """Fetch newform records by label, with a JSON cache and retry/backoff.

    ``http`` is anything with a ``get(url, params=..., timeout=...)`` method
    returning an object with ``status_code``, ``text`` and ``json()``; an
    ``httpx.Client`` by default.
    """

    def __init__(self, cache_dir: str | os.PathLike | None = None, http=None, attempts: int = 3, backoff: float = 0.5, base_url: str = LMFDB_URL, sleep=time.sleep):
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._http = http
        self.attempts = attempts
        self.backoff = backoff
        self.base_url = base_url
        self.sleep = sleep

    @property
    def http(self):
        if self._http is None:
            import httpx

            self._http = httpx.Client(follow_redirects=True)
        return self._http

    def _cache_file(self, label: str) -> Path | None:
        return self.cache_dir / f"lmfdb-{label}.json" if self.cache_dir else None

    def _get(self, label: str):
        last: Exception | None = None
        for attempt in range(self.attempts):
            try:
                resp = self.http.get(self.base_url, params={"label": label, "_format": "json"}, timeout=30)
            except Exception as exc:  # network errors from any client
                last = exc
            else:
                if resp.status_code == 404:
                    raise NotFound(label)
                if resp.status_code < 500:
                    return resp
                last = ImtError(f"server error {resp.status_code}")
            if attempt + 1 < self.attempts:
                self.sleep(self.backoff * 2**attempt)
        raise ImtError(f"LMFDB request for {label} failed after {self.attempts} attempts: {last}")

    def fetch(self, label: str) -> FormDescriptor:
        resp = self._get(label)
        text = resp.text
        digest = hashlib.sha256(text.encode()).hexdigest()
        cache = self._cache_file(label)
        if cache and cache.exists():
            cached = json.loads(cache.read_text())
            if cached.get("sha256") == digest:
                return FormDescriptor.from_json(cached["descriptor"])
        desc = descriptor_from_lmfdb(resp.json())
        if cache:
            atomic_write(cache, json.dumps({"sha256": digest, "descriptor": desc.to_json()}, sort_keys=True))
        return desc

    def cached(self, label: str) -> FormDescriptor | None:
        cache = self._cache_file(label)
        if cache and cache.exists():
            return FormDescriptor.from_json(json.loads(cache.read_text())["descriptor"])
        return None


def descriptor_from_lmfdb(payload: dict) -> FormDescriptor:
    """Map an mf_newforms API response onto a descriptor."""
    rows = payload.get("data") if isinstance(payload, dict) else None
    if not rows:
        raise NotFound("empty LMFDB response")
    row = rows[0]
    try:
        label, N, k, dim = row["label"], int(row["level"]), int(row["weight"]), int(row["dim"])
        order = int(row.get("char_order", 1))
        traces = row["traces"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"unexpected LMFDB record: {exc}") from exc
    if order == 1:
        flavor, disc = "gamma0", 1
    elif order == 2:
        cond = int(row["char_conductor"])
        flavor, disc = "gamma0", cond if k % 2 == 0 else -cond
    else:
        flavor, disc = "gamma1", 1
    poly = row.get("field_poly")
    picks = {}
    for ell in (2, 3, 5, 7, 11, 13):
        if N % ell and ell <= len(traces):
            picks[ell] = str(traces[ell - 1])
    return FormDescriptor(label, N, k, flavor, disc, dim, [int(c) for c in poly] if poly else None, picks, lmfdb_label=label, source="lmfdb")


def fetch_form(label: str, fixtures: dict[str, FormDescriptor] | None = None, client: LMFDBClient | None = None, no_net: bool = False) -> FormDescriptor:
    """Fixture first, then the LMFDB cache, then the network unless ``no_net``."""
    fixtures = load_fixtures() if fixtures is None else fixtures
    if label in fixtures:
        return fixtures[label]
    if client is not None:
        hit = client.cached(label)
        if hit is not None:
            return hit
        if not no_net:
            return client.fetch(label)
    raise NotFound(f"{label} is not in the fixture pack" + (" and the network is disabled" if no_net else ""))


# ---------------------------------------------------------------------------
# pipeline


class StageError(ImtError):
    """A pipeline failure annotated with its stage."""

    def __init__(self, stage: str, label: str, cause: Exception):
        super().__init__(f"[{stage}] {label}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def _space_cache_path(cache_dir: Path, desc: FormDescriptor) -> Path:
    return cache_dir / f"space-N{desc.N}-k{desc.k}-{desc.flavor}-D{desc.disc}-v{__version__}.json"


def build_space_cached(desc: FormDescriptor, cache_dir: str | os.PathLike | None = None):
    from . import modsym

    if cache_dir:
        path = _space_cache_path(Path(cache_dir), desc)
        if path.exists():
            try:
                return modsym.load_space(path)
            except (SchemaMismatch, ValueError, KeyError) as exc:
                log.warning("ignoring unreadable cache %s: %s", path, exc)
        space = modsym.build_space(desc.N, desc.k, desc.flavor, desc.disc)
        modsym.save_space(space, path)
        return space
    return modsym.build_space(desc.N, desc.k, desc.flavor, desc.disc)


def find_symbol(desc: FormDescriptor, sign: int, cache_dir=None):
    """The unique eigensymbol of the given sign matching the descriptor."""
    from . import modsym

    try:
        space = build_space_cached(desc, cache_dir)
    except Exception as exc:
        raise StageError("space", desc.label, exc) from exc
    try:
        syms = [s for s in modsym.eigen_decompose(space, sign, max_degree=max(12, desc.degree)) if modsym.matches(s, desc.selector())]
    except Exception as exc:
        raise StageError("eigen", desc.label, exc) from exc
    if len(syms) != 1:
        raise StageError("eigen", desc.label, NotFound(f"{len(syms)} orbits match the selector"))
    sym = syms[0]
    sym.label = desc.label
    return sym


def check_consistency(desc: FormDescriptor, sym) -> list[int]:
    """Primes ell whose recorded a_ell disagrees with the computed eigenvalue.

    Exact coefficient vectors are compared when the Hecke field polynomial
    matches ours; otherwise only traces are comparable.
    """
    same_field = desc.minpoly is not None and tuple(desc.minpoly) == tuple(sym.field.minpoly)
    bad = []
    for ell, tr in desc.traces.items():
        if ell in sym.eigenvalues and sym.field.trace(sym.eigenvalues[ell]) != Fraction(tr):
            bad.append(ell)
    if same_field:
        for ell, vec in desc.a_ell.items():
            if ell in sym.eigenvalues and tuple(Fraction(c) for c in vec) != tuple(sym.eigenvalues[ell]):
                bad.append(ell)
    return sorted(set(bad))


def normalized_symbol(desc: FormDescriptor, p: int, prime_index: int | None = None, i: int = 0, precision: int = 30, cache_dir=None):
    from . import modsym, padic
    from .mazurtate import theta_sign

    sym = find_symbol(desc, theta_sign(i, desc.k), cache_dir)
    try:
        ctx = padic.PrimeContext(p, precision)
        emb = padic.EmbeddedNumberField(sym.field.minpoly, desc.prime_index(p, prime_index), ctx)
        return modsym.cohomological_normalize(sym, emb)
    except Exception as exc:
        raise StageError("normalize", desc.label, exc) from exc


def slope_of(sym, p: int) -> Fraction | float:
    ap = sym.embedding.embed(sym.eigenvalues[p])
    return float("inf") if ap.exact_zero else ap.valuation_p()


def theta_elements(sym, nmax: int, i: int = 0, j: int = 0) -> dict:
    from .mazurtate import theta

    out = {}
    for n in range(nmax + 1):
        try:
            out[n] = theta(sym, n, j, i)
        except Exception as exc:
            raise StageError(f"theta n={n}", sym.label or "?", exc) from exc
    return out


def invariant_series(thetas: dict) -> list[tuple[int, object, object]]:
    series = []
    for n, th in sorted(thetas.items()):
        inv = th.invariants()
        series.append((n, inv.mu, inv.lam))
    return series
