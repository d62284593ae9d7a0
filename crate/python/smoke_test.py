"""Smoke test for the rhobound extension module."""

import pathlib
import sys

import rhobound

CORPUS = pathlib.Path(__file__).resolve().parents[1] / "crates" / "rho-bound" / "corpus"


def main() -> int:
    prog = rhobound.load(str(CORPUS / "factsum.koat"))
    assert prog.variables == ["a", "x", "y"], prog.variables
    assert prog.transitions == ["t0", "t1", "t2", "t3", "t4", "t5"]
    assert prog.calls == ["rho1", "rho2"]

    result = rhobound.analyze(prog)
    assert result.worst_case == "WORST_CASE(?, O(n^2))", result.worst_case
    assert str(result.runtime["t5"]) == "x^2"
    assert str(result.size[("rho1", "a")]) == "x"
    assert result.runtime["t1"].eval({"a": 0, "x": -4, "y": 0}) == 4
    assert result.overall.is_finite
    assert result.check(trials=20) is None

    run = rhobound.run(prog, {"a": 0, "x": 2, "y": 0})
    assert run.total == 12 and not run.exhausted
    assert run.edge_counts["t3"] == 3
    assert "f2 (2,2,0)" in run.dot
    bound = sum(b.eval({"a": 0, "x": 2, "y": 0}) for b in result.runtime.values())
    assert run.total <= bound

    nonterm = rhobound.analyze(rhobound.load(str(CORPUS / "nonterm.koat")))
    assert nonterm.overall.eval({"x": 1}) is None
    assert not nonterm.runtime["t1"].is_finite

    try:
        rhobound.parse("(RULES l0(x) -> l1(x)")
    except ValueError as e:
        assert "error" in str(e).lower() or str(e)
    else:
        raise AssertionError("parse error not raised")
    try:
        rhobound.run(prog, {"a": 0, "x": 2})
    except ValueError as e:
        assert "missing value" in str(e)
    else:
        raise AssertionError("missing variable not reported")

    print("smoke test passed:", result.worst_case, str(result.overall))
    return 0


if __name__ == "__main__":
    sys.exit(main())
