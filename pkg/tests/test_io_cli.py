import json
import re

import numpy as np
import pytest

from stratspine import cli
from stratspine.geometry import InputError, PointCloud, read_cloud_csv, write_cloud_csv
from stratspine.io import (GraphDocument, GraphNode, atomic_write_text, cloud_digest, export_dot,
                           read_document, write_document)
from stratspine.synth import SynthSpec, generate


def _doc():
    nodes = [GraphNode(0, 2, [0.0, 1.0], 3, [0, 1, 2], [1, 0, 1]),
             GraphNode(1, 1, [2.0, 0.5], 2, [3, 4], None, True),
             GraphNode(2, 1, [4.0, 0.5], 1, [5])]
    return GraphDocument("spine", nodes, [[0, 1], [1, 2]], {"tau": 0.1})


def test_json_round_trip(tmp_path):
    doc = _doc()
    (path,) = write_document(doc, tmp_path, "spine")
    back = read_document(path)
    assert back == doc
    assert back.to_json() == doc.to_json()


def test_json_rejects_bad_documents():
    d = _doc().to_dict()
    with pytest.raises(InputError):
        GraphDocument.from_dict({k: v for k, v in d.items() if k != "format_version"})
    with pytest.raises(InputError):
        GraphDocument.from_dict({**d, "format_version": "2"})
    with pytest.raises(InputError):
        GraphDocument.from_dict({**d, "edges": [[0, 9]]})
    with pytest.raises(InputError):
        GraphDocument.from_dict({**d, "nodes": d["nodes"] + [d["nodes"][0]]})
    with pytest.raises(InputError):
        GraphDocument.from_json("{not json")


def test_unknown_fields_are_ignored():
    d = _doc().to_dict()
    d["nodes"][0]["colour"] = "red"
    d["comment"] = "extra"
    assert GraphDocument.from_dict(d) == _doc()


def test_dot_export_counts():
    text = export_dot(_doc())
    assert text.startswith("graph spine {")
    assert len(re.findall(r"^\s*n\d+ \[", text, re.M)) == 3
    assert len(re.findall(r"^\s*n\d+ -- n\d+;", text, re.M)) == 2
    assert 'label="dim=2, β=(1,0,1), |pts|=3"' in text
    assert "shape=box" in text


def test_dot_empty_and_single():
    empty = export_dot(GraphDocument("spine", [], []))
    assert empty == "graph spine {\n}\n"
    one = export_dot(GraphDocument("spine", [GraphNode(0, 2, [0.0], 1, [0])], []))
    assert one.count("[") == 1 and "dim=2" in one


def test_write_document_formats(tmp_path):
    paths = write_document(_doc(), tmp_path, "g", "both")
    assert sorted(p.name for p in paths) == ["g.dot", "g.json"]
    with pytest.raises(InputError):
        write_document(_doc(), tmp_path, "g", "yaml")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "sub" / "a.txt", "one")
    atomic_write_text(tmp_path / "sub" / "a.txt", "two")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.txt"]
    assert (tmp_path / "sub" / "a.txt").read_text() == "two"


def test_cloud_digest_tracks_content():
    a = PointCloud([[0.0, 1.0]])
    assert cloud_digest(a) == cloud_digest(PointCloud([[0.0, 1.0]]))
    assert cloud_digest(a) != cloud_digest(PointCloud([[0.0, 1.5]]))
    assert cloud_digest(a).startswith("sha256:")


@pytest.fixture
def cloud_csv(tmp_path):
    cloud, _ = generate(SynthSpec("plane_one_line", counts=(400, 100), seed=1))
    path = tmp_path / "cloud.csv"
    write_cloud_csv(cloud, path)
    return path


def test_cli_synth(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert cli.main(["synth", "--shape", "spiral_plane", "--seed", "2", "--out", str(out),
                     "--labels-out", str(tmp_path / "l.txt")]) == 0
    assert read_cloud_csv(out).n == 1100
    assert len((tmp_path / "l.txt").read_text().split()) == 1100


def test_cli_pipeline_writes_documents(tmp_path, cloud_csv, capsys):
    out = tmp_path / "out"
    code = cli.main(["pipeline", "--in", str(cloud_csv), "--tau", "0.1", "--delta", "0.05",
                     "--h0-thresh", "0.05", "--out-dir", str(out), "--format", "both"])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["scaffolding.dot", "scaffolding.json", "spine.dot", "spine.json",
                     "summary.json", "summary.txt"]
    spine = read_document(out / "spine.json")
    assert spine.provenance["config"]["tau"] == 0.1
    assert spine.provenance["input_digest"] == cloud_digest(read_cloud_csv(cloud_csv))
    assert "spine:" in capsys.readouterr().out
    assert cli.main(["export", "--in", str(out / "spine.json"), "--out", str(tmp_path / "x.dot")]) == 0
    assert (tmp_path / "x.dot").read_text() == (out / "spine.dot").read_text()


def test_cli_config_file_and_override(tmp_path, cloud_csv):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\ntau = 0.5\ndelta = 0.05\nh0 = 0.05  # alias\n")
    args = cli.make_parser().parse_args(["pipeline", "--in", str(cloud_csv), "--config", str(cfg)])
    conf = cli.build_config(args)
    assert (conf.tau, conf.delta, conf.h0_thresh) == (0.5, 0.05, 0.05)
    args = cli.make_parser().parse_args(["pipeline", "--in", str(cloud_csv), "--config", str(cfg),
                                         "--tau", "0.1"])
    assert cli.build_config(args).tau == 0.1


def test_cli_bad_input_exits_1(tmp_path, cloud_csv, capsys):
    assert cli.main(["pipeline", "--in", str(tmp_path / "missing.csv")]) == 1
    assert cli.main(["pipeline", "--in", str(cloud_csv), "--tau", "-1"]) == 1
    assert cli.main(["pipeline", "--in", str(cloud_csv), "--delta", "wide"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert cli.main(["pipeline", "--in", str(cloud_csv), "--config", str(bad)]) == 1
    assert cli.main(["nonsense"]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_check(tmp_path, cloud_csv, capsys, monkeypatch):
    assert cli.main(["check", "--in", str(cloud_csv), "--tau", "0.1"]) == 0
    assert capsys.readouterr().out.startswith("ok:")
    monkeypatch.setattr(cli, "check_cover_tree", lambda root, cloud: ["separation violated"])
    assert cli.main(["check", "--in", str(cloud_csv), "--tau", "0.1"]) == 2


def test_cli_sweep(tmp_path, cloud_csv):
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--in", str(cloud_csv), "--taus", "0.5,0.1", "--deltas", "0.05",
                     "--out-dir", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "tau,delta,n_leaves,n_spine_vertices,dims,error"
    assert len(rows) == 3
    assert (out / "cell001_spine.json").exists()


def test_cli_audio_features(tmp_path):
    from stratspine.audiofeat import WavAudio, write_wav

    rng = np.random.default_rng(0)
    write_wav(tmp_path / "a.wav", WavAudio(rng.uniform(-0.3, 0.3, size=44100 * 2), 44100))
    assert cli.main(["audio-features", "--in", str(tmp_path / "a.wav"), "--out",
                     str(tmp_path / "a.csv"), "--block-len", "20"]) == 0
    cloud = read_cloud_csv(tmp_path / "a.csv")
    assert cloud.dim == 59 and cloud.n == 43 - 20 + 1
    times = json.loads((tmp_path / "a.times.json").read_text())
    assert len(times) == cloud.n and times[0]["start"] == 0.0
