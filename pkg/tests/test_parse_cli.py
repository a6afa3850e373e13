"""Expression grammar and the batch front end."""

from fractions import Fraction
import io
import json
import os
import random

import pytest

from resolvkit.cli import main
from resolvkit.parse import ParseError, parse_many, parse_polynomial
from resolvkit.series import Jet


def run_cli(argv, env=None):
    buf = io.StringIO()
    saved = {}
    env = env or {}
    for k, v in env.items():
        saved[k] = os.environ.get(k)
        os.environ[k] = v
    try:
        code = main(argv, out=buf)
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v
    return code, buf.getvalue()


class TestGrammar:
    def test_cusp(self):
        jet, names = parse_polynomial("y^2 - x^3")
        assert names == ["y", "x"]
        assert jet == Jet(2, 24, {(2, 0): 1, (0, 3): -1})

    def test_declared_order(self):
        jet, names = parse_polynomial("y^2 - x^3", var_names=["x", "y"])
        assert names == ["x", "y"]
        assert jet == Jet(2, 24, {(0, 2): 1, (3, 0): -1})

    def test_square_expansion(self):
        jet, names = parse_polynomial("(x + y)^2", var_names=["x", "y"])
        assert jet == Jet(2, 24, {(2, 0): 1, (1, 1): 2, (0, 2): 1})

    def test_rational_coefficients(self):
        jet, _ = parse_polynomial("x/2 + 3/4", var_names=["x"])
        assert jet == Jet(1, 24, {(1,): Fraction(1, 2), (0,): Fraction(3, 4)})

    def test_fractional_exponent_rejected(self):
        with pytest.raises(ParseError) as err:
            parse_polynomial("x^(1/2)")
        assert "non-integer exponent" in str(err.value)

    def test_negative_exponent_rejected(self):
        with pytest.raises(ParseError):
            parse_polynomial("x^-2")

    def test_division_by_variable_rejected(self):
        with pytest.raises(ParseError):
            parse_polynomial("1/x")

    def test_error_position(self):
        with pytest.raises(ParseError) as err:
            parse_polynomial("x + @")
        assert err.value.position == 4

    def test_numbered_variables(self):
        jet, names = parse_polynomial("x1*x2 - x3^2")
        assert names == ["x1", "x2", "x3"]
        assert jet.coeff((1, 1, 0)) == 1

    def test_shared_frame(self):
        jets, names = parse_many(["x", "x + y"])
        assert names == ["x", "y"]
        assert all(j.nvars == 2 for j in jets)

    def test_unary_minus(self):
        jet, _ = parse_polynomial("-x^2", var_names=["x"])
        assert jet == Jet(1, 24, {(2,): -1})

    def test_fuzz_no_crashes(self):
        rng = random.Random(1234)
        alphabet = "xy123+-*/^()?. #\t"
        for _ in range(10_000):
            length = rng.randint(0, 24)
            text = "".join(rng.choice(alphabet) for _ in range(length))
            try:
                parse_polynomial(text)
            except ParseError:
                pass  # positioned error is the contract


class TestCliRuns:
    def test_resolve_cusp_exit_zero(self):
        code, text = run_cli(["resolve", "y^2 - x^3", "--emit", "json,dot,text", "--verify"])
        assert code == 0
        assert '"format": "resolvkit-tree/1"' in text
        assert "digraph" in text
        assert "verified: True" in text

    def test_dc_gevrey(self):
        code, text = run_cli(["dc", "gevrey:1"])
        assert code == 0
        assert "log-convex: yes" in text
        assert "not-quasianalytic" in text
        assert "derivation-closed: yes" in text

    def test_dc_constant(self):
        code, text = run_cli(["dc", "constant"])
        assert code == 0
        assert "quasianalytic: quasianalytic" in text

    def test_dc_custom(self):
        code, text = run_cli(["dc", "custom:1,1,3,4"])
        assert code == 0
        assert "log-convex: no (first violation at k=2)" in text
        assert "inconclusive" in text

    def test_compose(self):
        code, text = run_cli(["compose", "y^2", "x + x^2", "--gamma", "3"])
        assert code == 0
        assert "coefficient at gamma=[3]: 2" in text
        assert "oracle-match: true" in text

    def test_compose_two_components(self):
        code, text = run_cli(["compose", "y1*y2", "x, x^2", "--gamma", "3"])
        assert code == 0
        assert "coefficient at gamma=[3]: 1" in text

    def test_input_error_exit_four(self):
        code, text = run_cli(["resolve", "x^(1/2)"])
        assert code == 4
        assert "non-integer exponent" in text

    def test_budget_exit_three(self):
        code, text = run_cli(["resolve", "y^2 - x^3", "--max-blowups", "1"])
        assert code == 3
        assert "budget" in text

    def test_env_truncation(self):
        code, text = run_cli(
            ["resolve", "y - x^2", "--emit", "json"], env={"RESOLVKIT_TRUNCATION": "8"}
        )
        assert code == 0
        assert '"truncation": 8' in text

    def test_verify_round_trip(self, tmp_path):
        out = tmp_path / "cusp"
        code, text = run_cli(
            ["resolve", "y^2 - x^3", "--emit", "json", "--out", str(out), "--verify"]
        )
        assert code == 0
        code2, text2 = run_cli(["verify", str(out) + ".json"])
        assert code2 == 0
        assert "verified: True" in text2
        # byte-identical reruns
        out2 = tmp_path / "cusp2"
        run_cli(["resolve", "y^2 - x^3", "--emit", "json", "--out", str(out2)])
        assert (tmp_path / "cusp.json").read_text() == (tmp_path / "cusp2.json").read_text()

    def test_verify_rejects_tampered_tree(self, tmp_path):
        out = tmp_path / "t"
        run_cli(["resolve", "y^2 - x^3", "--emit", "json", "--out", str(out)])
        data = json.loads((tmp_path / "t.json").read_text())
        keep = [nd for nd in data["nodes"] if nd["id"] in (0, 1)]
        strict = {"nvars": 2, "trunc": 22, "terms": [[[1, 0], "-1"], [[0, 2], "1"]]}
        keep.append(
            {
                "id": 99,
                "parent": 1,
                "kind": "Leaf",
                "base_point": None,
                "prep": None,
                "center_indices": None,
                "chart_index": None,
                "identity": False,
                "invariant_pair": [1, 1],
                "s_total": 1,
                "omega_scaled": None,
                "assumptions": [],
                "budget": None,
                "blowup_index": 1,
                "leaf_checks": {
                    "strict_order": 1,
                    "crossings_ok": True,
                    "passed": True,
                    "strict_transform": strict,
                    "ledger": [
                        {
                            "eid": 0,
                            "origin": "new",
                            "jet": {"nvars": 2, "trunc": 22, "terms": [[[1, 0], "1"]]},
                        }
                    ],
                },
            }
        )
        data["nodes"] = keep
        (tmp_path / "cut.json").write_text(json.dumps(data))
        code, text = run_cli(["verify", str(tmp_path / "cut.json")])
        assert code == 2
        assert "FAIL" in text

    def test_rectilinearize_cli(self):
        code, text = run_cli(
            ["rectilinearize", "x", "x + y", "--vars", "x,y", "--verify"]
        )
        assert code == 0
        assert "verified: True" in text

    def test_monomialize_cli(self):
        code, text = run_cli(["monomialize", "x^2*y^3", "--verify"])
        assert code == 0
        assert "blow-ups: 0" in text

    def test_parallel_flag_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_cli(["resolve", "y^2 - x^5", "--emit", "json", "--out", str(a)])
        run_cli(["resolve", "y^2 - x^5", "--emit", "json", "--out", str(b), "--parallel"])
        da = json.loads((tmp_path / "a.json").read_text())
        db = json.loads((tmp_path / "b.json").read_text())
        assert da["nodes"] == db["nodes"]
        assert da["summary"] == db["summary"]
