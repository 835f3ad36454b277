import subprocess
import sys

import numpy as np
import pytest

from ldwpool import io
from ldwpool.attention import AttentionParams
from ldwpool.cli import main
from ldwpool.filters import WaveletFilterPair, haar, random_constrained
from ldwpool.tensor import FeatureMap


@pytest.fixture
def haar_file(tmp_path):
    path = tmp_path / "haar.txt"
    io.write_filters(path, haar())
    return path


@pytest.fixture
def square_pgm(tmp_path):
    path = tmp_path / "square.pgm"
    path.write_bytes(io.encode_pgm(np.array([[1, 2], [3, 4]])))
    return path


def random_pgm(path, rng, shape=(16, 12)):
    path.write_bytes(io.encode_pgm(rng.integers(0, 256, shape)))
    return path


def parse_table(text):
    return dict(line.split("\t", 1) for line in text.strip().splitlines())


class TestDecompose:
    def test_pgm_scaling(self, tmp_path, haar_file, square_pgm):
        out = tmp_path / "sub.ldwt"
        assert main(["decompose", "--input", str(square_pgm), "--filters", str(haar_file), "--output", str(out)]) == 0
        tensors = io.read_container(out)
        assert list(tensors) == ["LL", "LH", "HL", "HH"]
        assert tensors["LL"].data.item() == pytest.approx(5 / 255, abs=1e-15)
        assert tensors["LH"].data.item() == pytest.approx(-2 / 255, abs=1e-15)

    def test_container_input(self, tmp_path, haar_file, rng):
        src = tmp_path / "x.ldwt"
        io.write_container(src, {"X": FeatureMap(rng.normal(size=(3, 4, 6)))})
        out = tmp_path / "sub.ldwt"
        assert main(["decompose", "--input", str(src), "--filters", str(haar_file), "--output", str(out),
                     "--padding", "reflect", "--dtype", "float32"]) == 0
        assert io.decode_container(out.read_bytes())[1] == "float32"
        assert io.read_container(out)["HH"].shape == (3, 2, 3)

    def test_missing_filters(self, tmp_path, square_pgm, capsys):
        missing = tmp_path / "nope.txt"
        code = main(["decompose", "--input", str(square_pgm), "--filters", str(missing), "--output", str(tmp_path / "o")])
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_odd_dimensions(self, tmp_path, haar_file, capsys):
        src = random_pgm(tmp_path / "odd.pgm", np.random.default_rng(0), (3, 4))
        code = main(["decompose", "--input", str(src), "--filters", str(haar_file), "--output", str(tmp_path / "o")])
        assert code == 2
        assert "odd" in capsys.readouterr().err

    def test_unreadable_input(self, tmp_path, haar_file):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"garbage")
        assert main(["decompose", "--input", str(bad), "--filters", str(haar_file), "--output", str(tmp_path / "o")]) == 2


class TestReconstruct:
    def test_roundtrip_identical(self, tmp_path, haar_file, rng, capsys):
        src = random_pgm(tmp_path / "img.pgm", rng)
        sub, back = tmp_path / "sub.ldwt", tmp_path / "back.pgm"
        assert main(["decompose", "--input", str(src), "--filters", str(haar_file), "--output", str(sub)]) == 0
        assert main(["reconstruct", "--input", str(sub), "--filters", str(haar_file), "--output", str(back),
                     "--as-pgm", "--reference", str(src)]) == 0
        assert "psnr: identical" in capsys.readouterr().err
        a, _ = io.decode_pgm(src.read_bytes())
        b, _ = io.decode_pgm(back.read_bytes())
        assert np.max(np.abs(a - b)) <= 1

    def test_container_output_and_psnr(self, tmp_path, rng, capsys):
        filt = tmp_path / "f.txt"
        io.write_filters(filt, random_constrained(4, 1))
        src = random_pgm(tmp_path / "img.pgm", rng)
        sub, back = tmp_path / "sub.ldwt", tmp_path / "back.ldwt"
        main(["decompose", "--input", str(src), "--filters", str(filt), "--output", str(sub)])
        assert main(["reconstruct", "--input", str(sub), "--filters", str(filt), "--output", str(back),
                     "--reference", str(src)]) == 0
        assert "dB" in capsys.readouterr().err
        assert io.read_container(back)["X"].shape == (1, 16, 12)

    def test_zero_subbands(self, tmp_path, haar_file):
        sub = tmp_path / "zero.ldwt"
        zero = FeatureMap(np.zeros((2, 3, 3)))
        io.write_container(sub, {n: zero for n in ("LL", "LH", "HL", "HH")})
        out = tmp_path / "out.ldwt"
        assert main(["reconstruct", "--input", str(sub), "--filters", str(haar_file), "--output", str(out)]) == 0
        np.testing.assert_array_equal(io.read_container(out)["X"].data, np.zeros((2, 6, 6)))

    def test_missing_subband(self, tmp_path, haar_file, capsys):
        sub = tmp_path / "partial.ldwt"
        zero = FeatureMap(np.zeros((1, 2, 2)))
        io.write_container(sub, {n: zero for n in ("LL", "LH", "HL")})
        code = main(["reconstruct", "--input", str(sub), "--filters", str(haar_file), "--output", str(tmp_path / "o")])
        assert code == 2
        assert "HH" in capsys.readouterr().err


class TestCheck:
    def test_haar(self, haar_file, capsys):
        assert main(["check", "--filters", str(haar_file)]) == 0
        table = parse_table(capsys.readouterr().out)
        for key in ("residual_low_energy", "residual_low_sum", "residual_high_sum", "residual_high_energy"):
            assert abs(float(table[key])) < 1e-15
        assert float(table["L_Sym"]) == pytest.approx(2.0)

    def test_literal_haar(self, tmp_path, capsys):
        path = tmp_path / "lit.txt"
        io.write_filters(path, WaveletFilterPair([0.5, 0.5], [0.5, -0.5]))
        assert main(["check", "--filters", str(path)]) == 1
        table = parse_table(capsys.readouterr().out)
        assert float(table["L_High"]) == pytest.approx(0.25, abs=1e-12)
        assert float(table["L_Reverse"]) == pytest.approx(1.0, abs=1e-12)

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3\n1 2\n")
        assert main(["check", "--filters", str(path)]) == 2


class TestTrain:
    @pytest.fixture
    def image_dir(self, tmp_path, rng):
        d = tmp_path / "imgs"
        d.mkdir()
        for i in range(3):
            random_pgm(d / f"im{i}.pgm", rng, (8, 8))
        io.write_container(d / "extra.ldwt", {"X": FeatureMap(rng.uniform(0, 1, (1, 8, 8)))})
        return d

    def run(self, image_dir, out, log, *extra):
        return main(["train", "--images", str(image_dir), "--out", str(out), "--log", str(log), *extra])

    def test_zero_epochs_writes_init(self, tmp_path, image_dir):
        out, log = tmp_path / "f.txt", tmp_path / "log.tsv"
        assert self.run(image_dir, out, log, "--epochs", "0", "--taps", "5", "--seed", "3") == 0
        written = io.read_filters(out)
        np.testing.assert_array_equal(written.as_vector(), random_constrained(5, 3).as_vector())
        assert len(io.parse_log(log.read_text())) == 1

    def test_deterministic(self, tmp_path, image_dir):
        args = ("--epochs", "5", "--lr", "0.01", "--seed", "2", "--wavelet-weights", "1,1,1,0.5")
        self.run(image_dir, tmp_path / "a.txt", tmp_path / "a.log", *args)
        self.run(image_dir, tmp_path / "b.txt", tmp_path / "b.log", *args)
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
        assert (tmp_path / "a.log").read_bytes() == (tmp_path / "b.log").read_bytes()

    def test_pretrain_epoch0_residuals(self, tmp_path, image_dir):
        log = tmp_path / "log.tsv"
        assert self.run(image_dir, tmp_path / "f.txt", log, "--epochs", "3", "--pretrain", "on") == 0
        rows = io.parse_log(log.read_text())
        assert rows[0][0] == 0
        assert max(abs(v) for v in rows[0][1][3:]) < 1e-8
        assert len(rows) == 4

    def test_pretrain_off(self, tmp_path, image_dir):
        log = tmp_path / "log.tsv"
        assert self.run(image_dir, tmp_path / "f.txt", log, "--epochs", "0", "--pretrain", "off") == 0
        assert max(abs(v) for v in io.parse_log(log.read_text())[0][1][3:]) > 1e-3

    def test_empty_dir(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        assert self.run(d, tmp_path / "f.txt", tmp_path / "l") == 2

    def test_bad_weights(self, tmp_path, image_dir):
        with pytest.raises(SystemExit) as exc:
            self.run(image_dir, tmp_path / "f.txt", tmp_path / "l", "--wavelet-weights", "1,2")
        assert exc.value.code == 2


class TestBench:
    @pytest.mark.parametrize("k,ratio", [(4, "2"), (2, "1")])
    def test_ratio(self, k, ratio, capsys):
        assert main(["bench", "--taps", str(k), "--size", "16x16", "--channels", "2", "--iters", "2"]) == 0
        table = parse_table(capsys.readouterr().out)
        assert table["mac_ratio"] == ratio
        assert table["counted_separable_macs"] == table["separable_macs"]
        assert table["counted_dense_macs"] == table["dense_macs"]
        assert float(table["max_abs_diff"]) <= 1e-10


class TestAttention:
    @pytest.fixture
    def map_file(self, tmp_path, rng):
        path = tmp_path / "x.ldwt"
        io.write_container(path, {"X": FeatureMap(rng.uniform(0, 1, (4, 8, 8)))})
        return path

    def listing(self, path):
        rows = [line.split("\t") for line in path.read_text().splitlines()]
        return np.array([[float(v) for v in r] for r in rows])

    def test_zero_params(self, tmp_path, map_file):
        params = tmp_path / "p.ldwt"
        assert main(["attention-init", "--channels", "4", "--reduction", "2", "--zeros", "--output", str(params)]) == 0
        out, lst = tmp_path / "o.ldwt", tmp_path / "l.tsv"
        assert main(["attention", "--input", str(map_file), "--params", str(params), "--output", str(out),
                     "--listing", str(lst)]) == 0
        np.testing.assert_array_equal(self.listing(lst)[:, 2], 0.5)
        x = io.read_container(map_file)["X"].data
        np.testing.assert_allclose(io.read_container(out)["X"].data, 0.5 * x)

    def test_constant_input_normalized(self, tmp_path):
        src = tmp_path / "c.ldwt"
        io.write_container(src, {"X": FeatureMap(np.full((2, 4, 4), 3.0))})
        params = tmp_path / "p.ldwt"
        io.write_attention(params, AttentionParams.random(2, 1, seed=0))
        lst = tmp_path / "l.tsv"
        assert main(["attention", "--input", str(src), "--params", str(params), "--output", str(tmp_path / "o"),
                     "--normalize", "on", "--listing", str(lst)]) == 0
        np.testing.assert_array_equal(self.listing(lst)[:, 1], 0.0)

    def test_scale_by_two(self, tmp_path, map_file):
        params = tmp_path / "p.ldwt"
        main(["attention-init", "--channels", "4", "--reduction", "1", "--seed", "0", "--output", str(params)])
        doubled = tmp_path / "x2.ldwt"
        io.write_container(doubled, {"X": FeatureMap(2 * io.read_container(map_file)["X"].data)})
        l1, l2 = tmp_path / "l1.tsv", tmp_path / "l2.tsv"
        for src, lst in ((map_file, l1), (doubled, l2)):
            assert main(["attention", "--input", str(src), "--params", str(params), "--output", str(tmp_path / "o"),
                         "--normalize", "on", "--listing", str(lst)]) == 0
        g1, g2 = self.listing(l1)[:, 2], self.listing(l2)[:, 2]
        assert np.ptp(g1) > 1e-3
        # exact up to the O(epsilon / variance) term of the normalization guard
        np.testing.assert_allclose(g1, g2, atol=1e-6)

    def test_channel_mismatch(self, tmp_path, map_file):
        params = tmp_path / "p.ldwt"
        io.write_attention(params, AttentionParams.zeros(2, 1))
        assert main(["attention", "--input", str(map_file), "--params", str(params), "--output", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path, haar_file):
    proc = subprocess.run([sys.executable, "-m", "ldwpool", "check", "--filters", str(haar_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "status\tok" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "ldwpool", "check", "--filters", str(tmp_path / "missing")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stdout == ""
    assert "missing" in proc.stderr
