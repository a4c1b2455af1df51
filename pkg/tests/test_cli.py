import subprocess
import sys

import numpy as np
import pytest

from hdtomo import io
from hdtomo.cli import main
from hdtomo.metrics import nrmse
from hdtomo.phantoms import PhantomSpec, interior_mask


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("phantom", "--nx", 64, "-o", d / "ph") == 0
    assert run("project", d / "ph", "--views", 192, "-o", d / "sino") == 0
    return d


def test_phantom_project_fbp_pipeline(work):
    assert run("fbp", work / "sino", "-o", work / "rec") == 0
    ref = io.load_image(work / "ph")
    rec = io.load_image(work / "rec")
    spec = PhantomSpec.from_dict(io.ArrayFile.read(work / "ph").meta["phantom"])
    assert nrmse(rec.data, ref.data, interior_mask(spec, ref.grid)) < 0.05


def test_sparsify_live_views(work):
    assert run("project", work / "ph", "--views", 768, "--dets", 96, "-o", work / "s768") == 0
    assert run("sparsify", work / "s768", "--ds", 8, "-o", work / "sp8") == 0
    af = io.ArrayFile.read(work / "sp8")
    assert af.meta["live_views"] == 96 and af.meta["ds_factor"] == 8
    assert int(np.count_nonzero(np.abs(af.data).sum(axis=1))) == 96


def test_reruns_are_byte_identical(work):
    for tag in ("a", "b"):
        assert run("sparsify", work / "sino", "--ds", 4, "-o", work / f"sp{tag}") == 0
        assert run("interp", work / f"sp{tag}", "-o", work / f"in{tag}") == 0
        assert run("mbir", work / f"sp{tag}", "--iters", 5, "-o", work / f"mb{tag}") == 0
    for name in ("in", "mb"):
        for ext in (".json", ".bin"):
            assert (work / f"{name}a{ext}").read_bytes() == (work / f"{name}b{ext}").read_bytes()
    assert (work / "mba.trace.csv").read_text().startswith("iter,cost\n")


def test_decompose_compose_round_trip(work):
    assert run("decompose", work / "ph", "-K", 2, "-o", work / "dk") == 0
    ps = io.load_patchset(work / "dk")
    assert ps.data.shape == (4, 32, 32)
    assert run("decompose", work / "sino", "-K", 2, "--filter", "-o", work / "qk") == 0
    assert run("compose", work / "qk", "-o", work / "ck") == 0
    ref = io.load_image(work / "ph")
    spec = PhantomSpec.from_dict(io.ArrayFile.read(work / "ph").meta["phantom"])
    assert nrmse(io.load_image(work / "ck").data, ref.data, interior_mask(spec, ref.grid)) < 0.05


def test_eval_table(work, capsys):
    run("fbp", work / "sino", "-o", work / "rec")
    capsys.readouterr()
    assert run("eval", work / "ph", work / "rec", work / "ph", "--mask", "interior") == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "name\tnrmse\tpsnr\tssim"
    last = lines[2].split("\t")
    assert last[1] == "0.0000" and last[2] == "inf" and last[3] == "1.0000"
    assert all(len(v.split(".")[1]) == 4 for v in lines[1].split("\t")[1:])


def test_rank_report(work, capsys):
    assert run("rank-report", "--nx", 32, "--views", 64, "--levels", 1, 2, "-o", work / "rank.csv") == 0
    out = capsys.readouterr().out
    assert (work / "rank.csv").exists() and out.splitlines()[0].count(",") >= 2


def test_rebin(work):
    assert run("project", work / "ph", "--fan", "--views", 256, "--dets", 160, "--pitch", 0.75,
               "--sid", 150, "--sdd", 300, "-o", work / "fan") == 0
    assert run("rebin", work / "fan", "--views", 192, "--dets", 96, "-o", work / "reb") == 0
    assert io.load_sinogram(work / "reb").geometry.n_views == 192


def test_output_dir_from_environment(work, tmp_path, monkeypatch):
    monkeypatch.setenv("HDTOMO_OUT", str(tmp_path))
    assert run("fbp", work / "sino") == 0
    assert (tmp_path / "fbp.json").exists() and (tmp_path / "fbp.bin").exists()


def test_config_errors_exit_2(work, tmp_path):
    assert run("fbp", tmp_path / "missing") == 2
    assert run("sparsify", work / "sino", "--ds", 5, "-o", tmp_path / "x") == 2
    assert run("fbp", work / "ph", "-o", tmp_path / "x") == 2
    assert run("rebin", work / "sino", "-o", tmp_path / "x") == 2
    with pytest.raises(SystemExit) as exc:
        run("fbp")
    assert exc.value.code == 2


def test_divergence_exits_3(tmp_path):
    assert run("train", "--nx", 32, "--views", 48, "--steps", 5, "--n-train", 2, "--n-val", 0, "--depth", 1,
               "--width", 2, "--lr", 1e30, "--eval-every", 1, "-o", tmp_path / "net") == 3


def test_train_then_infer(work, tmp_path):
    assert run("train", "--nx", 32, "--views", 48, "--steps", 4, "--n-train", 2, "--n-val", 1, "--depth", 1,
               "--width", 2, "--eval-every", 2, "--ds", 4, "-o", tmp_path / "net") == 0
    assert (tmp_path / "net.log.csv").read_text().startswith("step,train_loss,val_loss,lr")
    assert run("phantom", "--nx", 32, "-o", tmp_path / "ph") == 0
    assert run("project", tmp_path / "ph", "--views", 48, "--dets", 48, "-o", tmp_path / "s") == 0
    assert run("sparsify", tmp_path / "s", "--ds", 4, "-o", tmp_path / "sp") == 0
    assert run("infer", tmp_path / "sp", "--checkpoint", tmp_path / "net", "-o", tmp_path / "out") == 0
    assert io.load_image(tmp_path / "out").data.shape == (32, 32)


def test_console_script_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hdtomo.cli", "phantom", "--nx", "16", "-o", str(tmp_path / "p")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and (tmp_path / "p.bin").stat().st_size == 16 * 16 * 8
