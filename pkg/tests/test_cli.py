import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from typelab import cli, products, serialize
from typelab.measures import SpectralMeasure

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def sample(name):
    return str(SAMPLES / name)


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = cli.main([*argv, "--out", str(out)])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("inputs")
    small = SpectralMeasure.lattice(1.0, 64)
    serialize.save_measure(d / "small_lattice.json", small)
    serialize.save_measure(d / "tilde.json", SpectralMeasure.lattice(1.0, 64, mass=2.0))
    serialize.save_measure(d / "single.json", SpectralMeasure.atoms([1.0], truncation_radius=10.0))
    serialize.save_measure(d / "origin.json", SpectralMeasure.atoms([0.0], truncation_radius=10.0))
    x = np.linspace(-20, 20, 401)
    f = np.exp(-x ** 2)
    hs = [(f / (x - 1j) + 8.0 ** -k * (1 + np.abs(x)) ** (-k - 1)) for k in range(1, 5)]
    bakan = {"f": {"grid": x.tolist(), "values": f.tolist()},
             "approximants": [{"grid": x.tolist(), "re": h.real.tolist(), "im": h.imag.tolist()}
                              for h in hs]}
    (d / "bakan.json").write_text(json.dumps(bakan))
    g = np.linspace(-40, 40, 8001)
    (d / "weight.json").write_text(json.dumps({"grid": g.tolist(), "values": ((1 + np.abs(g)) ** 4).tolist()}))
    S = products.sine_product(4096)
    serialize.save_product(d / "sin_zeros.json",
                           products.CanonicalProduct(S.positive_zeros, True, math.pi, math.pi, S.tail))
    serialize.save_measure(d / "integers.json", SpectralMeasure.lattice(1.0, 4096))
    return d


# -- one invocation per subcommand ---------------------------------------------------

SMOKE = [
    ("measure", "growth", "--measure", "@small"),
    ("measure", "majorize", "--measure", "@small", "--tilde", "@small",
     "--delta", "1", "--n", "0", "--C", "1"),
    ("measure", "equiv", "--measure", "@small", "--other", "@small",
     "--delta", "1", "--n", "0", "--C", "1"),
    ("measure", "proximity", "--measure", "@single", "--reference", "@origin", "--delta", "0.5"),
    ("measure", "imagtail", "--measure", "@small", "--delta", "1"),
    ("entire", "eval", "--zeros", sample("cos_zeros.json"), "--z", "1", "0.25+0.5i"),
    ("entire", "krein", "--zeros", sample("cos_zeros.json"), "--weight", '{"kind": "inv_quadratic"}'),
    ("entire", "annihilate", "--zeros", sample("cos_zeros.json"), "--f", "sinc:1:2", "--N", "1000"),
    ("entire", "counting", "--measure", "@small", "--grid", "1", "10", "50"),
    ("entire", "exclude", "--measure", sample("lattice.json"), "--c", "1", "--R-max", "1000"),
    ("entire", "shift", "--zeros", sample("cos_zeros.json"), "--M", "0", "--delta", "1"),
    ("entire", "lq7", "--K", "40"),
    ("weights", "transform", "--weight", "@weight", "--delta", "1", "--p", "2",
     "--grid", "-5", "5", "2001"),
    ("weights", "bakan", "--input", "@bakan", "--n", "2"),
    ("nazarov", "check", "--diffeo", sample("arcsinh.json")),
    ("nazarov", "build", "--diffeo", sample("arcsinh.json"), "--K", "100"),
    ("nazarov", "verify", "--diffeo", sample("identity.json"), "--K", "1000", "--t-max", "200"),
    ("nazarov", "stable", "--diffeo", sample("arcsinh.json"), "--R-max", "1000"),
    ("sharpness", "thm15i", "--n-max", "3"),
    ("sharpness", "lq1", "--k-max", "4"),
    ("sharpness", "thm15ii", "--K", "40", "--k-max", "4"),
    ("sharpness", "logint", "--weight", "exp"),
    ("certify", "reference", "--model", "arithmetic_progression", "--ell", "2"),
    ("certify", "koosis", "--measure", sample("lattice.json"), "--omega", "ones"),
    ("certify", "zoo"),
    ("sl", "omega", "--a", "3.14159265", "--lam", "2", "--points", "11"),
    ("sl", "bound", "--potential", sample("constant_one.json"), "--a", "3", "--lam", "10"),
    ("sl", "weyl", "--a", "3.14159265", "--f", sample("bump.json"), "--lam-range", "0", "10", "11"),
    ("sl", "parseval", "--potential", sample("zero.json"), "--a", "3.14159265",
     "--measure", sample("cos_lattice.json"), "--f", sample("bump.json")),
    ("sl", "phi", "--measure", sample("lebesgue.json"), "--x-max", "3", "--points", "31"),
    ("sl", "glcheck", "--measure", sample("lebesgue.json"), "--a", "10", "--h-expected", "0"),
    ("sl", "pairing", "--measure", sample("lebesgue.json"), "--f", sample("even_bump.json")),
]


@pytest.mark.parametrize("argv", SMOKE, ids=[" ".join(a[:2]) for a in SMOKE])
def test_subcommand_runs(tmp_path, files, argv):
    names = {"small": files / "small_lattice.json", "single": files / "single.json",
             "origin": files / "origin.json", "bakan": files / "bakan.json",
             "weight": files / "weight.json"}
    argv = [str(names[a[1:]]) if a.startswith("@") else a for a in argv]
    code, report, out = run(tmp_path, *argv)
    assert code == 0
    assert report["command"] == " ".join(argv[:2]) if argv[0] != "certify" else report["command"] == "certify"
    assert "defaults" in report
    log = json.loads((out / "run-log.json").read_text())
    assert log["mode"] == "strict" and "elapsed_seconds" in log


def test_every_listed_subcommand_exists():
    listed = {
        "measure": "growth majorize equiv proximity imagtail",
        "entire": "eval krein annihilate counting exclude shift lq7",
        "weights": "transform bakan",
        "nazarov": "check build verify stable",
        "sharpness": "thm15i lq1 thm15ii logint",
        "sl": "omega bound weyl parseval phi glcheck pairing",
    }
    parser = cli.build_parser()
    for group, ops in listed.items():
        for op in ops.split():
            with pytest.raises(SystemExit) as exc:
                parser.parse_args([group, op, "--help"])
            assert exc.value.code == 0


# -- documented examples ---------------------------------------------------------

@pytest.mark.parametrize("form", [["koosis"], ["--statement", "koosis"]])
def test_koosis_example(tmp_path, form):
    code, report, _ = run(tmp_path, "certify", "--measure", sample("lattice.json"), *form,
                          "--omega", "ones")
    assert code == 0
    assert report["result"]["verdict"] == "holds" and report["result"]["value"] == math.pi


def test_certify_needs_a_statement(tmp_path):
    code, _, _ = run(tmp_path, "certify", "--measure", sample("lattice.json"))
    assert code == 2


def test_parseval_example(tmp_path):
    code, report, _ = run(tmp_path, "sl", "parseval", "--potential", sample("zero.json"),
                          "--a", "3.14159265", "--measure", sample("cos_lattice.json"),
                          "--f", sample("bump.json"))
    assert code == 0 and report["result"]["parseval"]["relative_error"] <= 1e-8


def test_nazarov_verify_example(tmp_path):
    code, report, out = run(tmp_path, "nazarov", "verify", "--diffeo", sample("arcsinh.json"),
                            "--c", "1", "--K", "100000", "--t-max", "500")
    assert code == 0
    assert "slope" in report["result"] and "verdict" in report["result"]
    assert (out / "data.csv").exists()


def test_phi_csv_feeds_glcheck(tmp_path):
    code, _, out = run(tmp_path, "sl", "phi", "--measure", sample("lebesgue.json"), "--x-max", "3",
                       "--points", "301")
    assert code == 0
    code, report, _ = run(tmp_path / "gl", "sl", "glcheck", "--phi", str(out / "data.csv"),
                          "--a", "10", "--h-expected", "0")
    assert code == 0 and report["result"]["verdict"] == "holds"


# -- exit codes ----------------------------------------------------------------------

def test_validation_error_exit_code(tmp_path):
    code, _, _ = run(tmp_path, "sl", "parseval", "--a", "1.0", "--measure", sample("cos_lattice.json"),
                     "--f", sample("bump.json"))
    assert code == 2


def test_missing_file_exit_code(tmp_path):
    assert run(tmp_path, "measure", "growth", "--measure", str(tmp_path / "nope.json"))[0] == 2


def test_bad_arguments_exit_code(tmp_path):
    assert cli.main(["entire", "lq7"]) == 2
    assert cli.main(["no-such-group"]) == 2


def test_require_verdict_inconclusive(tmp_path, files):
    argv = ["certify", "annihilator", "--measure", str(files / "integers.json"),
            "--zeros", str(files / "sin_zeros.json"), "--a", str(math.pi), "--f", "sinc:1:2"]
    code, report, _ = run(tmp_path, *argv)
    verdicts = cli._verdicts(report["result"])
    assert code == 0 and verdicts and all(v == "inconclusive" for v in verdicts)
    assert run(tmp_path, *argv, "--require-verdict")[0] == 3


def test_threads_env(monkeypatch):
    monkeypatch.setenv("TYPELAB_THREADS", "0")
    with pytest.raises(Exception):
        cli.threads()
    monkeypatch.setenv("TYPELAB_THREADS", "2")
    assert cli.threads() == 2


# -- determinism and round trips -------------------------------------------------

def test_strict_reports_are_byte_identical(tmp_path):
    argv = ["certify", "koosis", "--measure", sample("lattice.json"), "--omega", "ones"]
    _, _, a = run(tmp_path / "a", *argv)
    _, _, b = run(tmp_path / "b", *argv)
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_manifest_run(tmp_path):
    manifest = {"command": "sl parseval",
                "inputs": {"potential": sample("zero.json"), "measure": sample("cos_lattice.json"),
                           "f": sample("bump.json")},
                "params": {"a": 3.14159265}, "output_dir": "job", "mode": "strict"}
    path = tmp_path / "job.json"
    path.write_text(json.dumps(manifest))
    assert cli.main(["run", str(path)]) == 0
    report = json.loads((tmp_path / "job" / "report.json").read_text())
    assert report["result"]["parseval"]["relative_error"] <= 1e-8
    log = json.loads((tmp_path / "job" / "run-log.json").read_text())
    assert set(log["inputs"]) == {"potential", "measure", "f"}


def test_manifest_missing_input(tmp_path):
    path = tmp_path / "job.json"
    path.write_text(json.dumps({"command": "measure growth",
                                "inputs": {"measure": "missing.json"}}))
    assert cli.main(["run", str(path)]) == 2


def test_certify_batch(tmp_path):
    entries = [{"statement": "koosis", "measure": sample("lattice.json"), "omega": "ones"},
               {"statement": "reference", "model": "lebesgue"}]
    path = tmp_path / "batch.json"
    path.write_text(json.dumps(entries))
    code, report, _ = run(tmp_path, "certify", "batch", "--manifest", str(path))
    assert code == 0
    assert [c["certificate"]["verdict"] for c in report["result"]["certificates"]] == ["holds", "holds"]


def test_emitted_zero_set_round_trips(tmp_path):
    code, _, out = run(tmp_path, "entire", "lq7", "--K", "40", "--emit")
    assert code == 0
    G = serialize.load_product(out / "G.json")
    serialize.save_product(tmp_path / "again.json", G)
    again = serialize.load_product(tmp_path / "again.json")
    assert np.array_equal(G.positive_zeros, again.positive_zeros)
    assert G.to_dict() == again.to_dict()


def test_measure_file_round_trips(tmp_path):
    mu = serialize.load_measure(sample("cos_lattice.json"))
    serialize.save_measure(tmp_path / "m.json", mu)
    again = serialize.load_measure(tmp_path / "m.json")
    assert np.array_equal(mu.positions, again.positions) and np.array_equal(mu.masses, again.masses)
    assert mu.symmetric == again.symmetric and mu.truncation_radius == again.truncation_radius


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "typelab", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
