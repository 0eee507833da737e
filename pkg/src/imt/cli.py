"""The ``imt`` command line.

Option values resolve as command-line flag, then ``IMT_<NAME>`` environment
variable, then the config file, then the built-in default.  The config file
is INI: keys in ``[imt]`` apply to every command and ``[imt.<command>]``
overrides them per command.
"""

from __future__ import annotations

import configparser
import functools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import __version__
from .errors import ImtError

log = logging.getLogger("imt")

COMMANDS = ("space", "eigen", "theta", "invariants", "signed", "cmatrix", "serre", "compare", "table", "bkval")
FORMATS = ("text", "tsv", "md", "json")


def config_paths() -> list[Path]:
    env = os.environ.get("IMT_CONFIG")
    if env:
        return [Path(env)]
    home = Path(os.environ.get("XDG_CONFIG_HOME", Path.home() / ".config"))
    return [Path("imt.ini"), home / "imt" / "config.ini"]


def load_config(path: str | None = None) -> dict[str, dict[str, str]]:
    """A click ``default_map`` built from the first existing config file."""
    parser = configparser.ConfigParser()
    candidates = [Path(path)] if path else config_paths()
    for cand in candidates:
        if cand.exists():
            parser.read(cand)
            break
    else:
        if path:
            raise click.BadParameter(f"config file {path} not found", param_hint="--config")
    base = _section(parser, "imt")
    return {cmd: {**base, **_section(parser, f"imt.{cmd}")} for cmd in COMMANDS}


# option names whose parameter is stored under another name
_DESTS = {"format": "fmt", "label": "labels", "forms": "forms_file", "n": "levels"}


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    for key, val in parser[name].items():
        key = key.replace("-", "_")
        dest = _DESTS.get(key, key)
        out[dest] = val.replace(",", " ").split() if dest in ("labels", "levels") else val
    return out


def _opt(*decls, **kw):
    name = decls[0].lstrip("-").replace("-", "_").upper()
    kw.setdefault("envvar", f"IMT_{name}")
    kw.setdefault("show_envvar", True)
    return click.option(*decls, **kw)


COMMON = [
    _opt("--p", "p", type=int, default=5, show_default=True, help="The prime p."),
    _opt("--label", "labels", multiple=True, help="Form label (LMFDB or Magma style); repeatable."),
    _opt("--prime-index", type=int, default=None, help="Prime above p, in our factor order."),
    _opt("--i", "i", type=int, default=0, show_default=True, help="Teichmuller twist omega^i."),
    _opt("--j", "j", type=int, default=0, show_default=True, help="Component j in 0..k-2."),
    _opt("--nmax", type=int, default=3, show_default=True, help="Largest level n."),
    _opt("--precision", type=int, default=30, show_default=True, help="p-adic working precision M."),
    _opt("--trunc", type=int, default=None, help="pi-adic truncation D for the logarithmic matrix."),
    _opt("--out", type=click.Path(dir_okay=False), default=None, help="Write output here instead of stdout."),
    _opt("--format", "fmt", type=click.Choice(FORMATS), default="text", show_default=True),
    _opt("--fixtures", type=click.Path(exists=True, dir_okay=False), default=None, help="Fixture pack (JSON)."),
    _opt("--no-net", is_flag=True, default=False, help="Never contact LMFDB."),
    _opt("--deep", is_flag=True, default=False, help="Allow the expensive level n = 4."),
    _opt("--cache-dir", type=click.Path(file_okay=False), default=None, help="Artifact cache directory."),
]


def common(fn):
    for deco in reversed(COMMON):
        fn = deco(fn)

    @functools.wraps(fn)
    def wrapper(**kw):
        try:
            return fn(**kw)
        except ImtError as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc

    return wrapper


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="imt")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, envvar="IMT_CONFIG", help="INI config file.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, config_path, verbose):
    """Iwasawa invariants of Mazur-Tate elements for non-ordinary modular forms."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx.default_map = load_config(config_path)


# ---------------------------------------------------------------------------
# helpers


def _emit(text: str, out: str | None) -> None:
    if out:
        from .forms import atomic_write

        atomic_write(Path(out), text)
    else:
        click.echo(text, nl=False)


def _job(kw, labels=None):
    from .jobs import JobSpec

    return JobSpec(
        p=kw["p"], labels=list(labels if labels is not None else kw["labels"]), prime_index=kw["prime_index"], i=kw["i"], j=kw["j"],
        nmax=kw["nmax"], precision=kw["precision"], trunc=kw["trunc"], fmt=kw["fmt"], deep=kw["deep"], cache_dir=kw["cache_dir"],
    )


def _descriptors(kw, labels=None, need=1):
    from .forms import LMFDBClient, fetch_form, load_fixtures

    labels = list(labels if labels is not None else kw["labels"])
    if len(labels) < need:
        raise click.UsageError(f"need at least {need} --label")
    fixtures = load_fixtures(kw["fixtures"])
    client = LMFDBClient(cache_dir=kw["cache_dir"]) if kw["cache_dir"] or not kw["no_net"] else None
    return [fetch_form(lab, fixtures, client, no_net=kw["no_net"]) for lab in labels]


def _runs(kw, labels=None, need=1):
    from .jobs import FormRun

    descs = _descriptors(kw, labels, need)
    job = _job(kw, [d.label for d in descs]).validate(descs)
    return [FormRun(d, job) for d in descs]


def _rows_out(rows: list[dict], columns: list[str], fmt: str) -> str:
    from .jobs import report_json

    if fmt == "json":
        return report_json(rows)
    cells = [[_fmt_cell(r.get(c)) for c in columns] for r in rows]
    if fmt == "md":
        lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
        lines += ["| " + " | ".join(line) + " |" for line in cells]
        return "\n".join(lines) + "\n"
    sep = "\t" if fmt == "tsv" else "  "
    if fmt == "text":
        widths = [max(len(c), *(len(line[i]) for line in cells)) if cells else len(c) for i, c in enumerate(columns)]
        fmt_line = lambda xs: sep.join(x.ljust(w) for x, w in zip(xs, widths)).rstrip()
        return "\n".join(fmt_line(line) for line in [columns, *cells]) + "\n"
    return "\n".join(sep.join(line) for line in [columns, *cells]) + "\n"


def _fmt_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and x == float("inf"):
        return "inf"
    if isinstance(x, (list, tuple)):
        return ",".join(_fmt_cell(v) for v in x)
    return str(x)


# ---------------------------------------------------------------------------
# commands


@main.command()
@common
def space(**kw):
    """Dimensions of the modular symbol space of each form."""
    from .forms import build_space_cached
    from .mazurtate import theta_sign

    rows = []
    for d in _descriptors(kw):
        sp = build_space_cached(d, kw["cache_dir"])
        cusp = sp.cuspidal_subspace()
        sign = theta_sign(kw["i"], d.k)
        rows.append({
            "label": d.label, "N": d.N, "k": d.k, "flavor": d.flavor, "disc": d.disc, "dim": sp.dimension,
            "cusp_dim": cusp.ncols(), "sign": sign, "sign_dim": sp.sign_subspace(sign, within=cusp).ncols(),
        })
    _emit(_rows_out(rows, ["label", "N", "k", "flavor", "disc", "dim", "cusp_dim", "sign", "sign_dim"], kw["fmt"]), kw["out"])


@main.command()
@common
def eigen(**kw):
    """Newform orbits of the space of each form, marking the selected one."""
    from . import modsym, padic
    from .forms import build_space_cached
    from .mazurtate import theta_sign

    rows = []
    for d in _descriptors(kw):
        sp = build_space_cached(d, kw["cache_dir"])
        for idx, sym in enumerate(modsym.eigen_decompose(sp, theta_sign(kw["i"], d.k)), 1):
            ctx = padic.PrimeContext(kw["p"], kw["precision"])
            slopes = []
            if kw["p"] in sym.eigenvalues:
                try:
                    for pi in range(1, len(padic.hensel_factor(sym.field.minpoly, ctx)) + 1):
                        emb = padic.EmbeddedNumberField(sym.field.minpoly, pi, ctx)
                        ap = emb.embed(sym.eigenvalues[kw["p"]])
                        slopes.append("inf" if ap.exact_zero else str(ap.valuation_p()))
                except ImtError as exc:
                    # only the selected orbit has to split; report the rest as unknown
                    log.info("orbit %d: slopes unavailable: %s", idx, exc)
                    slopes = ["?"]
            traces = {ell: str(sym.field.trace(sym.eigenvalues[ell])) for ell in sorted(sym.eigenvalues) if ell <= 13}
            rows.append({
                "label": d.label, "orbit": idx, "degree": sym.degree, "selected": "*" if modsym.matches(sym, d.selector()) else "",
                "minpoly": list(sym.field.minpoly), "traces": " ".join(f"{ell}:{t}" for ell, t in traces.items()), "slopes": slopes,
            })
    _emit(_rows_out(rows, ["label", "orbit", "degree", "selected", "minpoly", "traces", "slopes"], kw["fmt"]), kw["out"])


@main.command()
@common
def theta(**kw):
    """Mazur-Tate elements Theta_{n,j}(f, omega^i) for n <= nmax."""
    from .jobs import report_json

    out = []
    for run in _runs(kw):
        for n, th in run.thetas().items():
            inv = th.invariants()
            if th.body.field.degree == 1:
                mod = run.p**th.body.field.prec
                coeffs = [c - mod if c > mod // 2 else c for c in th.body.as_ints()]
            else:
                coeffs = [str(c) for c in th.body.coeffs]
            out.append({"label": run.desc.label, "n": n, "mu": inv.mu, "lambda": inv.lam, "denom_exp": th.body.denom_exp, "coeffs": coeffs, "theta": th})
    if kw["fmt"] == "json":
        _emit(report_json([r["theta"] for r in out]), kw["out"])
    else:
        _emit(_rows_out(out, ["label", "n", "mu", "lambda", "denom_exp", "coeffs"], kw["fmt"]), kw["out"])


@main.command()
@common
def invariants(**kw):
    """mu and lambda of Theta_n with the (k-1) q_n offset."""
    from .iwasawa import q_n

    rows = []
    for run in _runs(kw):
        for n, mu, lam in run.series():
            base = (run.desc.k - 1) * q_n(run.p, n)
            rows.append({"label": run.desc.label, "n": n, "mu": mu, "lambda": lam, "(k-1)q_n": base, "difference": lam - base if lam != float("inf") else "inf"})
    _emit(_rows_out(rows, ["label", "n", "mu", "lambda", "(k-1)q_n", "difference"], kw["fmt"]), kw["out"])


@main.command()
@common
def signed(**kw):
    """Signed lambda-invariants read off lambda(Theta_n)."""
    from .analysis import check_lower_bound
    from .jobs import report_json

    reports = []
    for run in _runs(kw):
        rep = run.report()
        rep.verdicts["lower_bound"] = check_lower_bound(rep)
        reports.append(rep)
    if kw["fmt"] == "json":
        _emit(report_json(reports), kw["out"])
        return
    if kw["fmt"] in ("tsv", "md"):
        rows = [{"label": r.label, "p": r.p, "k": r.k, "mu": r.mu, "lambda_sharp": r.lam_sharp, "lambda_flat": r.lam_flat, "pattern": r.pattern, "n0": r.n0} for r in reports]
        _emit(_rows_out(rows, ["label", "p", "k", "mu", "lambda_sharp", "lambda_flat", "pattern", "n0"], kw["fmt"]), kw["out"])
        return
    lines = []
    for r in reports:
        lines.append(f"{r.label}  p={r.p}  k={r.k}  lambda(Theta_n) = {tuple(r.lambdas().values())}")
        lines.append(f"  λ♯ = {_fmt_cell(r.lam_sharp)}")
        lines.append(f"  λ♭ = {_fmt_cell(r.lam_flat)}")
        lines.append(f"  mu = {_fmt_cell(r.mu)}  pattern = {r.pattern}  n0 = {r.n0}")
        if "corestriction" in r.extra:
            lines.append(f"  corestriction fit: {r.extra['corestriction']}")
        lb = r.verdicts["lower_bound"]
        if lb.get("tight"):
            lines.append(f"  λ♭ attains the lower bound k-2 = {r.k - 2}")
    _emit("\n".join(lines) + "\n", kw["out"])


@main.command()
@common
@click.option("--ap", type=int, default=None, help="a_p when no label is given.")
@click.option("--eps", type=int, default=1, show_default=True, help="eps(p) when no label is given.")
@click.option("--k", "k", type=int, default=None, help="Weight when no label is given.")
@click.option("--n", "levels", type=int, multiple=True, help="Levels to build (default 1 and 2).")
def cmatrix(ap, eps, k, levels, **kw):
    """Logarithmic matrix C_{n,f}: structure check and, with a label, the signed solve."""
    from .jobs import report_json
    from .logmatrix import c_matrix, check_cnf_structure, solve_signed

    levels = levels or (1, 2)
    runs = _runs(kw) if kw["labels"] else []
    if runs:
        run = runs[0]
        ap, eps, k = run.a_p_int(), run.eps_p(), run.desc.k
    elif ap is None or k is None:
        raise click.UsageError("give --label or both --ap and --k")
    rows = []
    for n in levels:
        C = c_matrix(ap, eps, k, kw["p"], n, M=kw["precision"], D=kw["trunc"])
        st = check_cnf_structure(C)
        row = {"n": n, "a_p": ap, "k": k, "parity": st["parity"], "structure": "pass" if st["passed"] else "FAIL", "check": st}
        if runs:
            Qn = run.theta(n, 0).body.as_ints()
            Qp = run.theta(n - 1, 0).body.as_ints()
            sol = solve_signed(Qn, Qp, C, eps=eps)
            row.update({"rank": f"{sol.rank}/{sol.size}", "consistent": sol.consistent, "residual": sol.residual_valuation, "shortcut": sol.shortcut, "solution": sol})
        rows.append(row)
    if kw["fmt"] == "json":
        _emit(report_json(rows), kw["out"])
    else:
        cols = ["n", "a_p", "k", "parity", "structure"] + (["rank", "consistent", "residual", "shortcut"] if runs else [])
        _emit(_rows_out(rows, cols, kw["fmt"]), kw["out"])


@main.command()
@common
@click.option("--k", "k", type=int, required=True, help="Weight k.")
def serre(k, **kw):
    """The Serre weight set attached to (p, k)."""
    from .analysis import serre_combinatorics
    from .jobs import report_json

    sc = serre_combinatorics(kw["p"], k)
    if kw["fmt"] == "json":
        _emit(report_json({**sc.__dict__, "elements": list(sc.elements), "classes": sorted(sc.classes)}), kw["out"])
        return
    body = "{" + ", ".join(str(x) for x in sc.elements) + "}" if sc.elements else "{}"
    _emit(f"p={sc.p} k={sc.k} s={sc.s} k'={sc.k_prime} delta={sc.delta}\n{body}\n", kw["out"])


@main.command()
@common
def compare(**kw):
    """Compare two forms: lambda equality, symbols mod varpi, corestriction congruence."""
    from .analysis import compare_pair
    from .jobs import report_json

    f_run, g_run = _runs(kw, need=2)[:2]
    f_rep, g_rep = f_run.report(), g_run.report()
    verdict = compare_pair(f_rep, g_rep, f_run.sym, g_run.sym, {n: t.body for n, t in f_run.thetas().items()}, {n: t.body for n, t in g_run.thetas().items()})
    verdict["f"] = {"label": f_rep.label, "lambda": list(f_rep.lambdas().values())}
    verdict["g"] = {"label": g_rep.label, "lambda": list(g_rep.lambdas().values())}
    if kw["fmt"] == "json":
        _emit(report_json(verdict), kw["out"])
        return
    lines = [
        f"f = {f_rep.label}: lambda = {tuple(f_rep.lambdas().values())}",
        f"g = {g_rep.label}: lambda = {tuple(g_rep.lambdas().values())}",
        f"lambda equal for all n: {verdict['all_equal']}",
    ]
    if "symbols" in verdict:
        lines.append(f"symbols congruent mod varpi: {verdict['symbols']['congruent']}")
    if "corestriction_congruence" in verdict:
        lines.append(f"corestriction lambda shift: {verdict['corestriction_lambda']}")
        lines.append(f"corestriction congruence: {verdict['corestriction_congruence']}")
    _emit("\n".join(lines) + "\n", kw["out"])


def _table_row(args):
    """Worker entry point: one table row per (descriptor, job)."""
    from .analysis import table_row
    from .jobs import FormRun, slope_str

    desc, job, label = args
    run = FormRun(desc, job)
    row = table_row(run.report(), desc.N, desc.degree, slope_str(run.slope()))
    row["label"] = label
    return row


@main.command()
@common
@click.option("--forms", "forms_file", type=click.Path(exists=True, dir_okay=False), default=None, help="File with one label per line.")
@click.option("--workers", type=int, default=1, show_default=True, envvar="IMT_WORKERS", help="Forms computed in parallel.")
def table(forms_file, workers, **kw):
    """lambda(Theta_n) table rows in the label, k, N, d, i, slope layout."""
    from .analysis import format_table
    from .jobs import report_json

    labels = list(kw["labels"])
    if forms_file:
        labels += [ln.split("#")[0].strip() for ln in Path(forms_file).read_text().splitlines()]
        labels = [lab for lab in labels if lab]
    descs = _descriptors(kw, labels)
    job = _job(kw, labels).validate(descs)
    tasks = [(d, job, lab) for d, lab in zip(descs, labels)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_table_row, tasks))
    else:
        rows = [_table_row(t) for t in tasks]
    if kw["fmt"] == "json":
        _emit(report_json(rows), kw["out"])
    else:
        _emit(format_table(rows, "md" if kw["fmt"] == "md" else "tsv"), kw["out"])


@main.command()
@common
@click.option("--e", "e", type=int, default=None, help="Ramification index of the coefficient field (default: from the embedding).")
def bkval(e, **kw):
    """Closed-form valuation of Theta_n at a primitive p^n-th root of unity, cross-checked directly."""
    from .analysis import bk_valuation

    rows = []
    for run in _runs(kw):
        rep = run.report()
        ram = e or run.sym.embedding.e
        for n in range(1, run.job.nmax + 1):
            bk = bk_valuation(rep, n, ram, run.theta(n).body)
            rows.append({"label": rep.label, "n": n, "closed_form": bk.value, "direct": bk.direct, "agree": bk.agree, "hypothesis": bk.hypothesis_ok})
    _emit(_rows_out(rows, ["label", "n", "closed_form", "direct", "agree", "hypothesis"], kw["fmt"]), kw["out"])


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
