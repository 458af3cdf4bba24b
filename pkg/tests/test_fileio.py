"""Family files, trace CSVs and certificate round-trips."""
import io
import json
from fractions import Fraction

import pytest

from sumchase import (InputError, abs_power, family, parse_certificate,
                      parse_spec_file, power_alternating, rademacher_harmonic,
                      trace_rows, write_certificate, write_trace)
from sumchase.fileio import emit_trace, parse_family
from conftest import write_family_file


def test_family_file_with_every_kind(tmp_path):
    path = write_family_file(tmp_path / "fam.json", [[
        {"kind": "rademacher_harmonic", "level": 0},
        {"kind": "power_alternating", "exponent": 0.5},
        {"kind": "abs_power", "exponent": 2.0, "scale": 0.25, "level": 1},
        {"kind": "composite",
         "combo": [{"coefficient": -1.0, "ref": 0},
                   {"coefficient": 2.0,
                    "ref": {"kind": "rademacher_harmonic", "level": 2}}],
         "perturbation": {"kind": "abs_power", "exponent": 3.0}},
    ]])
    fams = parse_spec_file(path)
    assert len(fams) == 1
    assert len(fams[0]) == 4
    assert fams[0][0] == rademacher_harmonic(0)
    assert fams[0][2] == abs_power(2.0, 0.25, sign_level=1)


def test_multiple_families_parse_independently(tmp_path):
    path = write_family_file(tmp_path / "two.json", [
        [{"kind": "power_alternating"}],
        [{"kind": "rademacher_harmonic", "level": 1}],
    ])
    fams = parse_spec_file(path)
    assert [len(f) for f in fams] == [1, 1]
    assert fams[0][0] == power_alternating(1.0)


@pytest.mark.parametrize("entries, fragment", [
    ([{"kind": "unknown_kind"}], "unknown kind"),
    ([{"kind": "rademacher_harmonic"}], "needs a level"),
    ([{"kind": "abs_power"}], "needs an exponent"),
    ([{"kind": "power_alternating", "level": 1}], "unexpected keys"),
    ([{"kind": "composite", "combo": []}], "nonempty combo"),
    ([{"kind": "composite",
       "combo": [{"coefficient": 1.0, "ref": 5}]}], "earlier series"),
    ([{"kind": "composite",
       "combo": [{"coefficient": 1.0}]}], "coefficient and ref"),
])
def test_malformed_series_entries_are_reported(entries, fragment):
    with pytest.raises(InputError, match=fragment):
        parse_family(entries)


def test_spec_file_errors_carry_positions(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{"families": [[{"kind":')
    with pytest.raises(InputError, match="line"):
        parse_spec_file(str(bad))
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"families": []}))
    with pytest.raises(InputError, match="nonempty"):
        parse_spec_file(str(empty))
    rootless = tmp_path / "rootless.json"
    rootless.write_text(json.dumps([1, 2]))
    with pytest.raises(InputError, match="families"):
        parse_spec_file(str(rootless))


def test_trace_rows_replay_the_running_sums():
    fam = family(power_alternating(1.0))
    rows = list(trace_rows(fam, (0, 1, 2), 1))
    assert [r.step for r in rows] == [0, 1, 2]
    assert [r.index for r in rows] == [0, 1, 2]
    assert rows[0].sums == (1.0,)
    assert rows[1].sums == (0.5,)
    assert rows[2].sums[0] == pytest.approx(0.5 + 1.0 / 3.0)
    assert rows[0].active_dim is None


def test_trace_rows_annotate_chain_stages(small_chain):
    fam, targets, chain, plan, _ = small_chain
    rows = trace_rows(fam, chain.final().injection, 2, chain)
    first = next(rows)
    # the empty initial condition owns no steps, so the first round's
    # condition is the active one from step zero
    assert first.active_dim == chain.conditions[1].dim
    assert first.active_eps == chain.conditions[1].eps


def test_empty_trace_is_just_a_header():
    buf = io.StringIO()
    emit_trace(iter(()), buf)
    assert buf.getvalue() == "step,index,term_0,sum_0\n"


def test_trace_files_are_byte_stable(tmp_path):
    fam = family(rademacher_harmonic(0), rademacher_harmonic(1))
    injection = tuple(range(16))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(str(a), trace_rows(fam, injection, 2))
    write_trace(str(b), trace_rows(fam, injection, 2))
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == "step,index,term_0,term_1,sum_0,sum_1"


def test_certificate_roundtrip_preserves_everything(small_chain, tmp_path):
    fam, targets, chain, _, _ = small_chain
    path = tmp_path / "chain.cert"
    write_certificate(str(path), chain, targets, (2.0, 3.0))
    data = parse_certificate(str(path))
    assert data.version == 1
    assert data.targets == tuple(float(t) for t in targets)
    assert data.schedule_values == (2.0, 3.0)
    assert data.conditions == chain.conditions
    assert len(data.links) == len(chain.checks)
    text = path.read_text()
    # tolerances are serialized as exact fractions
    assert f"eps={chain.final().eps}" in text


def test_certificate_rejects_damaged_files(tmp_path):
    good = tmp_path / "good.cert"
    good.write_text("certificate-version: 1\n"
                    "condition 0: f= d=1 eps=3\n")
    parsed = parse_certificate(str(good))
    assert parsed.conditions[0].injection == ()
    assert parsed.conditions[0].eps == Fraction(3)

    missing_version = tmp_path / "no_version.cert"
    missing_version.write_text("condition 0: f=1,2 d=1 eps=1/2\n")
    with pytest.raises(InputError, match="version"):
        parse_certificate(str(missing_version))

    gap = tmp_path / "gap.cert"
    gap.write_text("certificate-version: 1\n"
                   "condition 1: f=0 d=1 eps=1/2\n")
    with pytest.raises(InputError, match="gap"):
        parse_certificate(str(gap))

    junk = tmp_path / "junk.cert"
    junk.write_text("certificate-version: 1\n"
                    "condition 0: f=0 d=1 eps=1/2\n"
                    "mystery: 4\n")
    with pytest.raises(InputError, match="unrecognized"):
        parse_certificate(str(junk))


def test_certificate_files_are_byte_stable(small_chain, tmp_path):
    fam, targets, chain, _, _ = small_chain
    a, b = tmp_path / "a.cert", tmp_path / "b.cert"
    write_certificate(str(a), chain, targets)
    write_certificate(str(b), chain, targets)
    assert a.read_bytes() == b.read_bytes()
