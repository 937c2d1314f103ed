import os
import shutil

import pytest

from rsplots.convergence import main as convergence_main
from rsplots.indexmath import homogeneity, parse_tokens
from rsplots.scaling import main as scaling_main
from rsplots.schemas import SchemaError, homogeneity_map, read_table
from rsplots.universality import main as universality_main

DATA = os.path.join(os.path.dirname(__file__), "data")


def data(name: str) -> str:
    return os.path.join(DATA, name)


def test_schema_reader_and_missing_column(tmp_path):
    rows = read_table(data("moments.csv"), "moments")
    assert {"beta", "radius", "estimate"} <= set(rows[0])
    bad = tmp_path / "bad.csv"
    bad.write_text("beta,radius,p,stderr,n\n0,0.1,2,0,4\n")
    with pytest.raises(SchemaError, match="estimate"):
        read_table(str(bad), "moments")


def test_empty_input_is_error_and_no_file(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    out = tmp_path / "fig.png"
    code = scaling_main(
        [
            "--exponents", data("exponents.csv"),
            "--moments", str(empty),
            "--enumerate", data("enumerate.csv"),
            "--out", str(out),
        ]
    )
    assert code == 1
    assert not out.exists()


def test_index_homogeneity_matches_enumerate_table():
    rows = read_table(data("enumerate.csv"), "enumerate")
    for row in rows:
        recomputed = homogeneity(row["beta"], alpha=0.45)
        assert abs(recomputed - float(row["homogeneity"])) < 1e-9, row["beta"]


def test_scaling_figure(tmp_path):
    out = tmp_path / "scaling.png"
    code = scaling_main(
        [
            "--exponents", data("exponents.csv"),
            "--moments", data("moments.csv"),
            "--enumerate", data("enumerate.csv"),
            "--out", str(out),
        ]
    )
    assert code == 0
    assert out.exists() and out.stat().st_size > 10_000


def test_scaling_reference_annotations_match_enumerate(tmp_path, monkeypatch):
    # the dashed reference slope must be the homogeneity column verbatim
    import rsplots.scaling as scaling

    captured = {}
    orig = scaling.render

    homs = homogeneity_map(read_table(data("enumerate.csv"), "enumerate"))
    out = tmp_path / "fig.png"
    scaling.render(
        data("exponents.csv"), data("moments.csv"), data("enumerate.csv"), str(out)
    )
    # betas present in the moments table all have their reference in the map
    rows = read_table(data("moments.csv"), "moments")
    for row in rows:
        assert row["beta"] in homs


def test_convergence_figure_with_counterterm_panel(tmp_path):
    out = tmp_path / "conv.png"
    code = convergence_main(
        [
            "--cauchy", data("cauchy.csv"),
            "--counterterm", data("counterterm_ladder.csv"),
            "--enumerate", data("enumerate.csv"),
            "--out", str(out),
        ]
    )
    assert code == 0
    assert out.exists() and out.stat().st_size > 10_000


def test_convergence_alpha_fallback(tmp_path):
    out = tmp_path / "conv2.png"
    code = convergence_main(
        [
            "--cauchy", data("cauchy.csv"),
            "--counterterm", data("counterterm_ladder.csv"),
            "--alpha", "0.45",
            "--out", str(out),
        ]
    )
    assert code == 0
    assert out.exists()


def test_universality_figure(tmp_path):
    out = tmp_path / "univ.png"
    code = universality_main(["--input", data("universality.csv"), "--out", str(out)])
    assert code == 0
    assert out.exists() and out.stat().st_size > 10_000


@pytest.mark.parametrize("runner", ["scaling", "convergence", "universality"])
def test_figures_deterministic(tmp_path, runner):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"{runner}_{tag}.png"
        if runner == "scaling":
            code = scaling_main(
                [
                    "--exponents", data("exponents.csv"),
                    "--moments", data("moments.csv"),
                    "--enumerate", data("enumerate.csv"),
                    "--out", str(out),
                ]
            )
        elif runner == "convergence":
            code = convergence_main(
                [
                    "--cauchy", data("cauchy.csv"),
                    "--counterterm", data("counterterm_ladder.csv"),
                    "--enumerate", data("enumerate.csv"),
                    "--out", str(out),
                ]
            )
        else:
            code = universality_main(
                ["--input", data("universality.csv"), "--out", str(out)]
            )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_token_parser_roundtrip_examples():
    assert parse_tokens("0") == []
    assert parse_tokens("k1^2*n(0,1)") == [("k", 1, 2), ("n", (0, 1), 1)]
    with pytest.raises(ValueError):
        parse_tokens("zz")
