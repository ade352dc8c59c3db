import numpy as np
import pytest
from conftest import HIDDEN_SIZE
from itemalign.embeddings import read_embeddings
from itemalign_provider.cli import main


def test_encode_command(checkpoint, composed_file, tmp_path, capsys):
    out = tmp_path / "cli.embeddings.txt"
    code = main(["encode", str(composed_file), str(out), "--model", checkpoint])
    assert code == 0
    assert f"wrote {out}" in capsys.readouterr().out
    loaded = read_embeddings(out.read_text(encoding="utf-8"))
    assert loaded.dim == HIDDEN_SIZE
    assert loaded.header.count == 6


def test_flags_mirror_config(checkpoint, composed_file, tmp_path):
    out = tmp_path / "flags.embeddings.txt"
    code = main(["encode", str(composed_file), str(out),
                 "--model", checkpoint, "--pooling", "mean",
                 "--max-tokens", "64", "--batch-size", "2",
                 "--device", "cpu", "--prefix", "query: "])
    assert code == 0
    header = read_embeddings(out.read_text()).header
    assert header.provider == f"{checkpoint} pooling=mean prefix='query: '"


def test_encode_deterministic_across_invocations(checkpoint, composed_file, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["encode", str(composed_file), str(a), "--model", checkpoint]) == 0
    assert main(["encode", str(composed_file), str(b), "--model", checkpoint]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_token_report_command(checkpoint, composed_file, tmp_path, capsys):
    out = tmp_path / "tokens.csv"
    code = main(["token-report", str(composed_file), str(out),
                 "--model", checkpoint])
    assert code == 0
    assert "6 rows" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0] == "id,token_count,truncated"
    assert len(lines) == 7


def test_token_report_long_fixture(checkpoint, long_file, tmp_path):
    out = tmp_path / "long.csv"
    assert main(["token-report", str(long_file), str(out),
                 "--model", checkpoint]) == 0
    row = out.read_text().splitlines()[1]
    item_id, count, truncated = row.split(",")
    assert item_id == "long-1"
    assert int(count) > 512
    assert truncated == "true"


def test_malformed_input_exit_1(checkpoint, tmp_path, capsys):
    src = tmp_path / "bad.jsonl"
    src.write_text('{"id": "a", "condition": "c", "text": "x"}\nnope\n')
    code = main(["encode", str(src), str(tmp_path / "o.txt"),
                 "--model", checkpoint])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "line 2" in err and "\n" not in err.strip()


def test_missing_input_exit_2(checkpoint, tmp_path, capsys):
    code = main(["encode", str(tmp_path / "absent.jsonl"),
                 str(tmp_path / "o.txt"), "--model", checkpoint])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_bad_model_exit_1(tmp_path, composed_file, capsys):
    code = main(["encode", str(composed_file), str(tmp_path / "o.txt"),
                 "--model", str(tmp_path / "missing-model")])
    assert code == 1
    assert "cannot load model" in capsys.readouterr().err


def test_overwrite_input_exit_1(checkpoint, composed_file, capsys):
    for command in ("encode", "token-report"):
        code = main([command, str(composed_file), str(composed_file),
                     "--model", checkpoint])
        assert code == 1
        assert "overwrite" in capsys.readouterr().err


def test_invalid_max_tokens_exit_1(checkpoint, composed_file, tmp_path, capsys):
    code = main(["encode", str(composed_file), str(tmp_path / "o.txt"),
                 "--model", checkpoint, "--max-tokens", "0"])
    assert code == 1
    assert "max_tokens" in capsys.readouterr().err
