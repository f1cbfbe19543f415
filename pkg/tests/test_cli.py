import csv

import numpy as np
import pytest

from dualvar import SpaceTimeGrid
from dualvar.cli import STREAMS, main, rng_for
from dualvar.config import ConfigError, parse_config
from dualvar.grid import read_field_csv
from dualvar.verify import compare_fields

HEAT = """\
[problem]
family = heat      # quadratic H
k = 0.1
initial = sin_pi

[grid]
nx = 16
nt = 16
t_max = 0.1

[optimizer]
method = cg
max_iter = 2000
grad_tol = 1e-8
"""

BURGERS = """\
[problem]
family = burgers
c = {c}
margin = 0.5

[grid]
nx = 16
nt = 16
t_max = 0.2
periodic = true

[optimizer]
method = cg
max_iter = 20000
"""

NS_DUAL = """\
[problem]
family = ns-dual
c = {c}
nu_hat = 0.1

[grid]
nx = 8
ny = 8
nt = 8
t_max = 0.1

[verify]
n_states = 2
n_probe = 20
"""


def write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- config parsing ----------------------------------------------------------------

def test_parse_defaults_and_comments():
    cfg = parse_config(HEAT)
    assert cfg.family == "heat" and cfg.grid["nx"] == 16 and cfg.optimizer["seed"] == 42
    assert cfg.potential["kind"] == "quadratic" and cfg.make_grid().shape == (16, 16)


@pytest.mark.parametrize("text,message", [
    ("[problem]\nfamily = heat\n", "missing section grid"),
    ("[problem]\nfamily = heat\n[grid]\nnx = 16\nnt = sixteen\n",
     "line 5: cannot read 'sixteen' as int"),
    ("[problem]\nfamily = heat\n[grid]\nnx = 16\nthis is junk\n",
     "line 5: expected 'key = value'"),
    ("[problem]\nfamily = heat\nfoo = 1\n[grid]\nnx = 16\nnt = 16\n", "line 3: unknown key 'foo'"),
    ("[problem]\nfamily = wave\n[grid]\nnx = 16\nnt = 16\n", "line 2: unknown family"),
    ("[extra]\n[problem]\nfamily = heat\n[grid]\nnx = 16\nnt = 16\n", "line 1: unknown section"),
    ("[problem]\nfamily = heat\n[grid]\nnx = 16\n", "missing key nt"),
])
def test_parse_errors_carry_line_numbers(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_with_value_overrides_one_key():
    cfg = parse_config(HEAT)
    new = cfg.with_value("k", "0.2")
    assert new.problem["k"] == 0.2 and cfg.problem["k"] == 0.1
    assert cfg.with_value("grid.nx", 8).grid["nx"] == 8
    with pytest.raises(ConfigError):
        cfg.with_value("nope", 1)
    with pytest.raises(ConfigError, match="cannot read"):
        cfg.with_value("nx", "many")


def test_streams_are_independent_and_reproducible():
    cfg = parse_config(HEAT)
    a = rng_for(cfg, "states").random(4)
    assert np.array_equal(a, rng_for(cfg, "states").random(4))
    assert not np.array_equal(a, rng_for(cfg, "probes").random(4))
    assert sorted(STREAMS.values()) == [0, 1, 2, 3]


# -- run ------------------------------------------------------------------------------

def test_run_heat_writes_trace_and_snapshots(tmp_path):
    out = tmp_path / "out"
    code = main(["run", write(tmp_path, HEAT + "[output]\nsnapshot_every = 5\n"),
                 "--out", str(out)])
    assert code == 0
    trace = rows(out / "trace.csv")
    assert trace[0] == ["iter", "objective", "grad_norm", "primal_residual"]
    S = np.array([float(r[1]) for r in trace[1:]])
    assert np.all(np.diff(S) >= 0) and float(trace[-1][2]) <= 1e-8
    assert (out / "theta_final.csv").exists() and (out / "lambda_final.csv").exists()
    assert (out / "snapshots" / "theta_000005.csv").exists()


def test_run_budget_exhaustion_exits_2(tmp_path):
    code = main(["run", write(tmp_path, HEAT.replace("max_iter = 2000", "max_iter = 3")),
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_run_burgers_without_margin_reports_it(tmp_path, capsys):
    code = main(["run", write(tmp_path, BURGERS.format(c=0.3)), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "margin" in capsys.readouterr().err


def test_run_rejects_nonpositive_c(tmp_path, capsys):
    code = main(["run", write(tmp_path, BURGERS.format(c=0)), "--out", str(tmp_path / "o")])
    assert code == 1 and "c" in capsys.readouterr().err


def test_missing_grid_section_exits_1(tmp_path, capsys):
    code = main(["run", write(tmp_path, "[problem]\nfamily = heat\n")])
    assert code == 1 and "missing section grid" in capsys.readouterr().err


def test_missing_file_exits_1(tmp_path):
    assert main(["run", str(tmp_path / "absent.cfg")]) == 1


def test_ns_mixed_run_is_refused(tmp_path):
    text = NS_DUAL.format(c=4).replace("ns-dual", "ns-mixed")
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 1


def test_runs_are_bit_identical(tmp_path):
    cfg = write(tmp_path, HEAT.replace("[optimizer]", "[optimizer]\ninit = random"))
    main(["run", cfg, "--out", str(tmp_path / "a")])
    main(["run", cfg, "--out", str(tmp_path / "b")])
    assert ((tmp_path / "a" / "trace.csv").read_bytes()
            == (tmp_path / "b" / "trace.csv").read_bytes())


# -- verify ---------------------------------------------------------------------------

def test_verify_heat_passes(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", write(tmp_path, HEAT), "--out", str(out)]) == 0
    table = rows(out / "verify.csv")
    assert table[0] == ["check_name", "value", "threshold", "pass"]
    names = {r[0] for r in table[1:]}
    assert {"legendre_dP", "fenchel_gap", "gradient_check", "dispersion"} <= names
    assert all(r[3] == "true" for r in table[1:])


def test_verify_flags_corrupted_gradient(tmp_path):
    out = tmp_path / "v"
    text = HEAT + "[verify]\ncorrupt_gradient = true\nn_states = 1\n"
    assert main(["verify", write(tmp_path, text), "--out", str(out)]) == 1
    grad = [r for r in rows(out / "verify.csv") if r[0] == "gradient_check"][0]
    assert grad[3] == "false" and float(grad[1]) > 1e-3


def test_verify_ns_dual_and_singular_cases(tmp_path):
    assert main(["verify", write(tmp_path, NS_DUAL.format(c=4)), "--out",
                 str(tmp_path / "a")]) == 0
    tiny = NS_DUAL.format(c=0.01)
    assert main(["verify", write(tmp_path, tiny, "t.cfg"), "--out", str(tmp_path / "b")]) == 1
    expected = tiny + "expect_singular = true\n"
    assert main(["verify", write(tmp_path, expected, "e.cfg"), "--out",
                 str(tmp_path / "c")]) == 0


# -- sweep ------------------------------------------------------------------------------

def test_sweep_writes_summary(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", write(tmp_path, BURGERS.format(c=2)), "--param", "c",
                 "--values", "1,2,4,8", "--out", str(out)])
    assert code == 0
    table = rows(out / "summary.csv")
    assert table[0] == ["param", "converged", "final_objective", "final_residual",
                        "error_vs_oracle"]
    assert [r[0] for r in table[1:]] == ["c=1", "c=2", "c=4", "c=8"]
    assert all(r[1] == "true" and float(r[4]) < 5e-2 for r in table[1:])
    assert (out / "c=4" / "trace.csv").exists()


def test_empty_sweep_exits_1(tmp_path):
    assert main(["sweep", write(tmp_path, HEAT), "--param", "k", "--values", ",",
                 "--out", str(tmp_path / "s")]) == 1


def test_sweep_is_deterministic(tmp_path, monkeypatch):
    cfg = write(tmp_path, HEAT)
    main(["sweep", cfg, "--param", "k", "--values", "0.05,0.1", "--out", str(tmp_path / "a")])
    monkeypatch.setenv("DUALVAR_THREADS", "1")
    main(["sweep", cfg, "--param", "k", "--values", "0.05,0.1", "--out", str(tmp_path / "b")])
    assert ((tmp_path / "a" / "summary.csv").read_bytes()
            == (tmp_path / "b" / "summary.csv").read_bytes())


def test_sweep_over_H_scale_recovers_same_temperature(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", write(tmp_path, HEAT), "--param", "scale", "--values", "1,2",
                 "--out", str(out)]) == 0
    g = SpaceTimeGrid(16, 16, t_max=0.1)
    a, b = (read_field_csv(out / f"scale={v}" / "theta_final.csv", g) for v in (1, 2))
    assert compare_fields(b, a).l2_rel <= 1e-6
