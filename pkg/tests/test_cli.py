import json
import subprocess
import sys

import pytest

from thetascale.cli import build_parser, run

SUBCOMMANDS = ["scale-factor", "path-factor", "line-element", "curve-length", "geodesic",
               "distance", "action", "eom", "covariant-derivative", "qm-expect", "transfer",
               "hole-profile", "lightcone-scale"]


def cli(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(out):
    lines = out.strip("\n").split("\n")
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_all_subcommands_registered():
    sub = next(a for a in build_parser()._actions if a.__class__.__name__ == "_SubParsersAction")
    assert sorted(sub.choices) == sorted(SUBCOMMANDS)


def test_scale_factor_example(capsys):
    code, out, _ = cli(capsys, "scale-factor", "--theta", "constant:5", "--from", "0,0,0,0",
                       "--to", "1,2,3,0")
    assert code == 0 and out == "factor\n1.000000000000\n"


def test_hole_profile_example(capsys):
    code, out, err = cli(capsys, "hole-profile", "--K", "1", "--l", "1", "--direction", "inward",
                         "--samples", "5")
    head, rows = table(out)
    assert code == 0 and head == ["w", "unscaled", "scaled", "divergent"]
    assert len(rows) == 5 and [r[3] for r in rows] == ["0", "0", "0", "0", "1"]
    assert "scaled/l=" in err and "scaled/unscaled=" in err


def test_eom_example(capsys):
    code, out, _ = cli(capsys, "eom", "--theta", "linear:1;0", "--lagrangian", "free:1",
                       "--x0", "0", "--v0", "2", "--t-end", "1", "--dt", "0.001")
    head, rows = table(out)
    assert code == 0 and head == ["t", "x1", "v1"] and len(rows) == 1001
    assert abs(float(rows[-1][2]) - 1.0) <= 1e-8


def test_values(capsys):
    _, out, _ = cli(capsys, "transfer", "--theta", "linear:1", "--value", "2", "--from", "0,0",
                    "--to", "0,1")
    assert out == "value,factor\n0.735758882343,0.367879441171\n"
    _, out, _ = cli(capsys, "lightcone-scale", "--theta", "time-linear:0.1@10", "--observer",
                    "10,0,0,0", "--event", "10,0,0")
    assert out == "retarded_time,factor\n0.000000000000,0.367879441171\n"
    _, out, _ = cli(capsys, "covariant-derivative", "--theta", "linear:0.5", "--f", "poly:0,1",
                    "--at", "0,2")
    assert out.split("\n")[1] == "2.000000000000"
    _, out, _ = cli(capsys, "line-element", "--metric", "euclidean:3", "--theta", "constant:0",
                    "--at", "0,0,0,0", "--disp", "3,4,0")
    head, rows = table(out)
    assert rows[0][head.index("unscaled")] == "25.000000000000"
    _, out, _ = cli(capsys, "line-element", "--metric", "minkowski:3", "--theta", "constant:0",
                    "--at", "0,0,0,0", "--tensor")
    head, rows = table(out)
    assert len(rows) == 16 and rows[5][2:] == ["-1.000000000000", "-1.000000000000"]


def test_qm_and_curve_outputs(capsys):
    _, out, _ = cli(capsys, "qm-expect", "--packet", "gaussian:1;0.5", "--theta", "linear:0.3",
                    "--ref", "0,0", "--quantity", "norm")
    assert out == "quantity,value\nnorm,1.365130461145\n"
    _, out, _ = cli(capsys, "curve-length", "--curve", "segment:0,1,0,0;0,0.2,0,0",
                    "--theta", "radial:1@0,0,0")
    head, rows = table(out)
    assert abs(float(rows[0][head.index("scaled")]) - 4.16653175) < 1e-7
    _, out, _ = cli(capsys, "action", "--curve", "segment:0,0;1,1", "--lagrangian", "free:1",
                    "--theta", "linear:1")
    assert out == "action\n0.859140914230\n"


def test_output_file_and_plot(capsys, tmp_path):
    target, svg = tmp_path / "h.csv", tmp_path / "h.svg"
    code, out, _ = cli(capsys, "hole-profile", "--K", "-1", "--samples", "20", "-o", str(target),
                       "--plot", str(svg))
    assert code == 0 and out == ""
    data = target.read_bytes()
    assert data.startswith(b"w,unscaled,scaled,divergent\n") and b"\r" not in data
    text = svg.read_text()
    assert 'width="800pt"' in text or 'width="800' in text
    assert "<polyline" in text or "<path" in text


@pytest.mark.parametrize("argv, code, needle", [
    (["scale-factor", "--theta", "cubic:1", "--from", "0,0", "--to", "0,1"], 2, "cubic"),
    (["scale-factor", "--theta", "constant:1", "--to", "0,1"], 2, "--from"),
    (["nonsense"], 2, ""),
    ([], 2, "subcommand"),
    (["hole-profile", "--K", "abc"], 2, ""),
    (["curve-length", "--curve", "segment:0,1,0;0,0,0", "--theta", "radial:1@0,0"], 3, "diverge"),
    (["geodesic", "--theta", "linear:0.6,0.4", "--from", "0,0,0", "--to", "0,3,1",
      "--max-iter", "5"], 4, "residual"),
    (["geodesic", "--theta", "constant:0", "--from", "0,0", "--to", "1,1", "--metric",
      "minkowski:1"], 3, "Riemannian"),
])
def test_exit_codes(capsys, argv, code, needle):
    got, _, err = cli(capsys, *argv)
    assert got == code
    assert needle in err


def test_eom_singularity_keeps_partial(capsys):
    code, out, err = cli(capsys, "eom", "--theta", "radial:-1@1", "--lagrangian", "free:1",
                         "--x0", "0", "--v0", "1", "--t-end", "3", "--dt", "0.01")
    assert code == 3 and "singular" in err
    rows = table(out)[1]
    assert 1 < len(rows) < 300


def test_config_file(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"theta": "linear:1", "from": "0,0", "to": "0,1"}))
    code, out, _ = cli(capsys, "scale-factor", "--config", str(cfg))
    assert code == 0 and out == "factor\n2.718281828459\n"
    code, out, _ = cli(capsys, "scale-factor", "--config", str(cfg), "--to", "0,2")
    assert out == "factor\n7.389056098931\n"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert cli(capsys, "scale-factor", "--config", str(cfg))[0] == 2
    assert cli(capsys, "scale-factor", "--config", str(tmp_path / "none.json"))[0] == 2


def test_env_tolerance(capsys, monkeypatch):
    monkeypatch.setenv("THETASCALE_TOL", "1e-3")
    code, out, _ = cli(capsys, "curve-length", "--curve", "segment:0,0;0,1", "--theta", "linear:1")
    assert code == 0 and abs(float(table(out)[1][0][1]) - 1.718281828) < 1e-3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "thetascale", "scale-factor", "--theta",
                          "constant:5", "--from", "0,0,0,0", "--to", "1,2,3,0"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "factor\n1.000000000000\n"
