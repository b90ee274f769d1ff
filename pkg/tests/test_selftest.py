"""The embedded fixture suite must pass in full, and its artifact set must
be byte-stable across runs."""

from stylebalance import selftest


def test_all_fixtures_pass():
    results = selftest.run()
    failed = [r for r in results if not r.ok]
    assert not failed, "; ".join(f"{r.name}: {r.message}" for r in failed)
    assert len(results) >= 40


def test_fixture_names_unique():
    names = [name for name, _ in selftest.FIXTURES]
    assert len(set(names)) == len(names)


def test_subset_selection():
    name = selftest.FIXTURES[0][0]
    results = selftest.run([name])
    assert [r.name for r in results] == [name]
    assert results[0].ok


def test_artifacts_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    names_a = selftest.write_artifacts(a)
    names_b = selftest.write_artifacts(b)
    assert names_a == names_b
    assert len(names_a) >= 3
    for name in names_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()
