"""``stoqkit`` command line: deciders, cures, generators, sampler and verify suites.

Exit codes: 0 yes/success, 1 no, 2 undecided or not applicable (including
budget overruns), 64 usage, 65 unparsable input, 66 unreadable file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import __version__, curing, qmc, reductions, stoq, verify
from .hamiltonian import (
    DenseThresholdExceeded,
    Hamiltonian,
    HamiltonianError,
    HsumParseError,
    NonRealHamiltonian,
    serialize_hsum,
)

EXIT_YES, EXIT_NO, EXIT_UNDECIDED = 0, 1, 2
EXIT_USAGE, EXIT_PARSE, EXIT_IO = 64, 65, 66


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


@dataclass
class CommandReport:
    command: str
    inputs: list = field(default_factory=list)
    verdict: str = ""
    result: dict = field(default_factory=dict)
    exit_code: int = 0
    timing: dict = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> dict:
        return {"command": self.command, "inputs": self.inputs, "verdict": self.verdict,
                "result": self.result, "exit_code": self.exit_code, "timing": self.timing,
                "version": self.version}


class _Inputs:
    """Reads input files once and remembers their hashes for the report."""

    def __init__(self):
        self.records = []

    def text(self, path: str) -> str:
        try:
            if path == "-":
                data = sys.stdin.buffer.read()
            else:
                with open(path, "rb") as fh:
                    data = fh.read()
        except OSError as e:
            raise OSError(f"cannot read {path}: {e.strerror}") from None
        self.records.append({"path": path, "sha256": hashlib.sha256(data).hexdigest()})
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError:
            raise HsumParseError(0, f"{path} is not UTF-8") from None

    def hamiltonian(self, path: str) -> Hamiltonian:
        from .hamiltonian import parse_hsum

        return parse_hsum(self.text(path))


def _status_exit(status: stoq.Status) -> int:
    return {stoq.Status.STOQUASTIC: EXIT_YES, stoq.Status.NOT_STOQUASTIC: EXIT_NO}.get(status, EXIT_UNDECIDED)


def _out(args, rep: CommandReport, text: str):
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    elif args.json:
        rep.result["instance"] = text
    else:
        sys.stdout.write(text)


# subcommands ---------------------------------------------------------------------------------------


def cmd_check_global(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    H = inp.hamiltonian(args.file)
    v = stoq.check_global(H, budget=args.budget)
    rep.verdict, rep.exit_code, rep.result = v.status.value, _status_exit(v.status), v.to_json()
    lines = [v.status.value]
    if v.witness:
        x, y = v.witness
        lines.append(f"witness <{stoq.bitstring(x, H.n)}|H|{stoq.bitstring(y, H.n)}> = {v.value}")
    if v.skipped:
        lines.append(f"{len(v.skipped)} flip group(s) exceeded the budget of {args.budget} qubits")
    return lines


def cmd_check_termwise(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    H = inp.hamiltonian(args.file)
    c = stoq.check_termwise(H, args.m)
    rep.verdict = "YES" if c.yes else "NO"
    rep.exit_code = EXIT_YES if c.yes else EXIT_NO
    rep.result = c.to_json()
    lines = [f"{rep.verdict} (m = {args.m})"]
    if c.yes:
        lines.append(f"{len(c.generators)} stoquastic generator(s)")
    elif c.reason:
        lines.append(c.reason)
    return lines


def cmd_decompose(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    H = inp.hamiltonian(args.file)
    try:
        dec = stoq.decompose_global(H)
    except stoq.NotGloballyStoquastic as e:
        rep.verdict, rep.exit_code = "NotStoquastic", EXIT_NO
        rep.result = {"error": str(e)}
        return [f"NotStoquastic: {e}"]
    rep.verdict, rep.exit_code, rep.result = "Decomposed", EXIT_YES, dec.to_json()
    return [f"beta = {dec.beta}", f"M = {dec.M}", f"m' = {dec.m_prime}"] + [
        f"term {i + 1}: S = {stoq.bitstring(t.S, H.n)} x = {stoq.bitstring(t.a, H.n)} "
        f"circuit = {' '.join(str(g) for g in t.gates) or '-'}"
        for i, t in enumerate(dec.terms)]


def cmd_cure_hadamard(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    H = inp.hamiltonian(args.file)
    mask = curing.search_hadamard_mask(H, budget=args.budget)
    if mask is None:
        rep.verdict, rep.exit_code = "NoCure", EXIT_NO
        return ["no Hadamard mask cures this Hamiltonian"]
    from .hamiltonian import conjugate_hadamard

    rep.verdict, rep.exit_code = "Cured", EXIT_YES
    rep.result = {"mask": str(mask), "transformed": conjugate_hadamard(H, mask.bits).to_json()}
    return [f"mask {mask}"]


def cmd_cure_xyz(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    chain = curing.parse_chain(inp.text(args.chain))
    if args.method == "single-qubit":
        cure = curing.search_xyz_single_qubit(chain)
        if cure is None:
            rep.verdict, rep.exit_code = "NoCure", EXIT_NO
            return ["no single-qubit Clifford assignment cures this chain"]
        rep.verdict, rep.exit_code = "Cured", EXIT_YES
        rep.result = {"assignment": [r.matrix().tolist() for r in cure.assignment],
                      "tableau": cure.tableau.to_json(), "transformed": cure.transformed.to_json()}
        return ["Cured"] + [f"site {i}: {r.matrix().tolist()}" for i, r in enumerate(cure.assignment)]
    try:
        cure = curing.cure_xyz_clifford(chain)
    except curing.NotApplicable as e:
        rep.verdict, rep.exit_code, rep.result = "NotApplicable", EXIT_UNDECIDED, {"reason": str(e)}
        return [f"NotApplicable: {e}"]
    rep.verdict, rep.exit_code, rep.result = "Cured", EXIT_YES, cure.to_json()
    lines = ["Cured"]
    for src, img, s in zip(cure.image_map.sources, cure.image_map.images, cure.image_map.signs):
        lines.append(f"{src} -> {'-' if s < 0 else '+'}{img}")
    return lines


def _graph(inp: _Inputs, path: str, fields: bool) -> reductions.IsingInstance:
    return reductions.parse_graph(inp.text(path), fields=fields)


def cmd_gen(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    if args.kind == "prop1":
        p = reductions.gen_prop1(_graph(inp, args.input, args.fields))
        rep.result = {"E0": str(p.E0), "frustrated": p.frustrated}
        _out(args, rep, serialize_hsum(p.hamiltonian))
    elif args.kind == "conp":
        if args.K is None:
            raise UsageError("gen conp needs --K")
        H = reductions.gen_conp(_graph(inp, args.input, False), args.K, Fraction(args.eps))
        _out(args, rep, serialize_hsum(H))
    elif args.kind == "sigma2":
        if args.k is None:
            raise UsageError("gen sigma2 needs --k")
        f = reductions.parse_dimacs(inp.text(args.input))
        s = reductions.assemble_sigma2(f, args.k)
        rep.result = {"layout": s.layout.describe(), "qubits": s.layout.qubits}
        _out(args, rep, serialize_hsum(s.hamiltonian))
    else:
        f = reductions.parse_dimacs(inp.text(args.input))
        g, k = reductions.gadget_3sat_to_minmax(f)
        rep.result = {"k": k, "clauses": g.m}
        _out(args, rep, f"c minmax k {k}\n" + reductions.serialize_dimacs(g))
    rep.verdict, rep.exit_code = "Generated", EXIT_YES
    return []


def cmd_qmc(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    H = inp.hamiltonian(args.file)
    try:
        params = qmc.QmcParams(args.beta, args.slices, args.sweeps, burn_in=args.burn_in, thinning=args.thinning,
                               seed=args.seed, mode=args.mode, normalization=args.normalization)
    except ValueError as e:
        raise UsageError(str(e)) from None
    r = qmc.run_qmc(H, params)
    rep.verdict, rep.exit_code, rep.result = "Sampled", EXIT_YES, r.to_json()
    return [f"energy {r.energy:.10g} +- {r.stderr:.3g}", f"average sign {r.avg_sign:.6g} +- {r.sign_stderr:.3g}",
            f"acceptance {r.acceptance:.4f} over {r.samples} samples (seed {r.seed})"]


def cmd_verify(args, inp: _Inputs, rep: CommandReport) -> list[str]:
    names = verify.suite_names() if args.suite == "all" else [args.suite]
    if args.suite != "all" and args.suite not in verify.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from all, {', '.join(verify.suite_names())}")
    lines, results, ok = [], [], True
    for name in names:
        res = verify.run_suite(name, seed=args.seed)
        entry = res.to_json()
        if args.repeat > 1:
            digests = [res.digest] + [verify.run_suite(name, seed=args.seed).digest for _ in range(args.repeat - 1)]
            entry["reproducible"] = len(set(digests)) == 1
            ok &= entry["reproducible"]
        ok &= res.passed
        results.append(entry)
        tag = "PASS" if res.passed and entry.get("reproducible", True) else "FAIL"
        lines.append(f"{tag} {name}: {res.checked} checks, seed {args.seed}, digest {res.digest[:16]}")
        lines += [f"  {m}" for m in res.failures[:5]]
    rep.verdict = "Passed" if ok else "Failed"
    rep.exit_code = EXIT_YES if ok else EXIT_NO
    rep.result = {"suites": results}
    return lines


# parser ------------------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stoqkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stoqkit {__version__}")
    p.add_argument("--json", action="store_true", help="print the JSON command report")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    check = sub.add_parser("check", help="stoquasticity deciders")
    csub = check.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    g = csub.add_parser("global", help="all off-diagonal entries <= 0")
    g.add_argument("file")
    g.add_argument("--budget", type=int, default=stoq.DEFAULT_BUDGET, help="largest flip-group register enumerated")
    g.set_defaults(fn=cmd_check_global)
    t = csub.add_parser("termwise", help="sum of m-local stoquastic terms")
    t.add_argument("file")
    t.add_argument("--m", type=int, required=True)
    t.set_defaults(fn=cmd_check_termwise)

    d = sub.add_parser("decompose", help="gate decomposition of a globally stoquastic Hamiltonian")
    d.add_argument("file")
    d.set_defaults(fn=cmd_decompose)

    cure = sub.add_parser("cure", help="sign-curing basis changes")
    cusub = cure.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    h = cusub.add_parser("hadamard", help="smallest curing Hadamard mask")
    h.add_argument("file")
    h.add_argument("--budget", type=int, default=stoq.DEFAULT_BUDGET)
    h.set_defaults(fn=cmd_cure_hadamard)
    x = cusub.add_parser("xyz", help="cure an XYZ chain file")
    x.add_argument("chain")
    x.add_argument("--method", choices=["single-qubit", "clifford"], default="clifford")
    x.set_defaults(fn=cmd_cure_xyz)

    gen = sub.add_parser("gen", help="reduction instance generators")
    gen.add_argument("kind", choices=["prop1", "conp", "sigma2", "minmax"])
    gen.add_argument("input", help="graph edge list (prop1, conp) or DIMACS CNF (sigma2, minmax)")
    gen.add_argument("--K", type=int, help="energy threshold for conp")
    gen.add_argument("--eps", default="1/2", help="offset in (0, 1) for conp")
    gen.add_argument("--k", type=int, help="clause threshold for sigma2")
    gen.add_argument("--fields", action="store_true", help="add unit fields to the Ising instance (prop1)")
    gen.add_argument("-o", "--output", help="write the instance here instead of stdout")
    gen.set_defaults(fn=cmd_gen)

    q = sub.add_parser("qmc", help="path-integral Monte Carlo energy")
    q.add_argument("file")
    q.add_argument("--beta", type=float, required=True)
    q.add_argument("--slices", type=int, required=True)
    q.add_argument("--sweeps", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--mode", choices=["direct", "reweighted"], default="direct")
    q.add_argument("--burn-in", type=int, default=1000)
    q.add_argument("--thinning", type=int, default=1)
    q.add_argument("--normalization", choices=["N", "N-1"], default="N")
    q.set_defaults(fn=cmd_qmc)

    v = sub.add_parser("verify", help="run invariant suites")
    v.add_argument("suite", help=f"one of: all, {', '.join(verify.suite_names())}")
    v.add_argument("--seed", type=int, default=verify.DEFAULT_SEED)
    v.add_argument("--repeat", type=int, default=1, help="rerun and compare digests")
    v.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    command = " ".join(x for x in (args.command, getattr(args, "mode", None)) if x)
    rep = CommandReport(command)
    inp = _Inputs()
    t0 = time.perf_counter()
    lines: list[str] = []
    try:
        lines = args.fn(args, inp, rep)
    except UsageError as e:
        rep.verdict, rep.exit_code, rep.result = "UsageError", EXIT_USAGE, {"error": str(e)}
    except OSError as e:
        rep.verdict, rep.exit_code, rep.result = "IOError", EXIT_IO, {"error": str(e)}
    except (DenseThresholdExceeded, reductions.SizeBudgetExceeded, curing.UndecidedSearch) as e:
        rep.verdict, rep.exit_code, rep.result = "Undecided", EXIT_UNDECIDED, {"error": str(e)}
    except (HsumParseError, NonRealHamiltonian) as e:
        rep.verdict, rep.exit_code, rep.result = "ParseError", EXIT_PARSE, {"error": str(e)}
    except HamiltonianError as e:
        rep.verdict, rep.exit_code, rep.result = "PreconditionFailed", EXIT_USAGE, {"error": str(e)}
    except ValueError as e:
        # remaining ValueErrors come from the chain, graph and DIMACS readers
        rep.verdict, rep.exit_code, rep.result = "ParseError", EXIT_PARSE, {"error": str(e)}
    rep.inputs = inp.records
    rep.timing = {"seconds": round(time.perf_counter() - t0, 6)}
    if args.json:
        print(json.dumps(rep.to_json(), indent=2, default=str))
    else:
        for line in lines:
            print(line)
        if "error" in rep.result:
            print(f"{rep.verdict}: {rep.result['error']}", file=sys.stderr)
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
