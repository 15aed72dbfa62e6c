import json

import pytest

from liftlayers.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestFlags:
    def test_zero_epochs(self, capsys):
        code, _, err = run(["fit1d", "--epochs", "0"], capsys)
        assert code == 2 and "usage" in err

    def test_unknown_flag(self, capsys):
        assert run(["fit1d", "--bogus"], capsys)[0] == 2

    def test_invalid_config_value(self, capsys):
        code, _, err = run(["fit1d", "--knots", "1"], capsys)
        assert code == 2 and "knot" in err

    def test_help_lists_defaults(self, capsys):
        code, help_text, _ = run(["fit1d", "--help"], capsys)
        assert code == 0
        for fragment in ("--lr LR", "(default: 0.1)", "(default: 0.9)", "(default: 128)",
                         "(default: 0.0001)", "(default: 2000)"):
            assert fragment in help_text

    @pytest.mark.parametrize("cmd", ["fit1d", "fit2d", "robust", "gradcheck", "meshinfo", "costmatrix"])
    def test_every_subcommand_has_help(self, cmd, capsys):
        assert run([cmd, "--help"], capsys)[0] == 0


class TestCommands:
    def test_fit1d_outputs(self, tmp_path, capsys):
        code, out, _ = run(["fit1d", "--seed", "7", "--epochs", "200", "--out", str(tmp_path), "--no-plots"], capsys)
        assert code == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert any(n.endswith("_lift.csv") for n in names)
        assert sum(n.endswith(".ckpt") for n in names) == 6  # epochs 25, 75, 200 for both nets
        sidecar = next(p for p in tmp_path.iterdir() if p.name.endswith("_config.json"))
        cfg = json.loads(sidecar.read_text())
        assert cfg["seed"] == 7 and cfg["epochs"] == 200

    @pytest.mark.parametrize("arch", ["linear", "relu", "maxout", "lift1d", "lift2d", "scaled", "std2d"])
    def test_gradcheck(self, arch, capsys):
        code, out, _ = run(["gradcheck", "--arch", arch], capsys)
        assert code == 0 and "max relative error" in out

    def test_meshinfo_export(self, tmp_path, capsys):
        mesh = tmp_path / "m.txt"
        code, out, _ = run(["meshinfo", "--vertices", "4", "--export", str(mesh)], capsys)
        assert code == 0 and "simplices 18" in out
        code, out, _ = run(["meshinfo", "--mesh", str(mesh)], capsys)
        assert code == 0 and "vertices 16" in out

    def test_runtime_error_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("2 3 1\n0 0\n1 1\n2 2\n0 1 2\n")
        code, _, err = run(["meshinfo", "--mesh", str(bad)], capsys)
        assert code == 1
        assert "simplex.Triangulation failed: SingularSimplexError" in err

    def test_costmatrix(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        data.write_text("0,0\n0.5,1\n1,0\n")
        code, out, _ = run(["costmatrix", "--data", str(data), "--knots-x", "3", "--knots-y", "3",
                            "--out", str(tmp_path)], capsys)
        assert code == 0 and "3x3" in out
        assert any(p.name.endswith("_theta.csv") for p in tmp_path.iterdir())

    def test_robust(self, tmp_path, capsys):
        code, out, _ = run(["robust", "--iters", "50", "--out", str(tmp_path), "--no-plots"], capsys)
        assert code == 0 and out.count("direct run") == 4
