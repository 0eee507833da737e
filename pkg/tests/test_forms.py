import json

import pytest

from imt import forms
from imt.errors import ImtError, NotFound, OutOfRange, SchemaMismatch
from imt.jobs import FormRun, JobSpec, report_json

PAYLOAD = {
    "data": [
        {
            "label": "11.2.a.a",
            "level": 11,
            "weight": 2,
            "dim": 1,
            "char_order": 1,
            "traces": [1, -2, -1, 2, 1, 2, -2, 0, -2, -2, 1, -2, 4],
            "field_poly": [0, 1],
        }
    ]
}


class Resp:
    def __init__(self, status, payload=None):
        self.status_code = status
        self._payload = payload
        self.text = json.dumps(payload, sort_keys=True)

    def json(self):
        return self._payload


class FakeHttp:
    def __init__(self, *answers):
        self.answers = list(answers)
        self.calls = 0

    def get(self, url, params=None, timeout=None):
        self.calls += 1
        ans = self.answers.pop(0)
        if isinstance(ans, Exception):
            raise ans
        return ans


def _client(tmp_path, *answers):
    sleeps = []
    http = FakeHttp(*answers)
    return forms.LMFDBClient(tmp_path, http=http, sleep=sleeps.append), http, sleeps


def test_fixture_pack_covers_named_forms(fixtures):
    for label in ["27.4.a.b", "9.4.a.a", "G0N9k4A", "9.8.a.b", "9.16.a.b", "27.16.a.b", "G0N14k2A", "G1N7k3A", "G1N7k5B", "G1N3k7A", "G1N23k7B", "G1N13k2A", "G1N8k3A", "G0N17k4A", "G1N4k5A", "4.5.b.a", "4.17.b.b"]:
        assert label in fixtures
    assert fixtures["G0N9k4A"] is fixtures["9.4.a.a"]


def test_fixture_round_trip(tmp_path, fixtures):
    descs = list({id(d): d for d in fixtures.values()}.values())
    path = tmp_path / "pack.json"
    forms.save_fixtures(descs, path)
    again = forms.load_fixtures(path)
    for d in descs:
        assert again[d.label] == d


def test_fixture_version_is_checked(tmp_path):
    path = tmp_path / "pack.json"
    path.write_text(json.dumps({"version": 99, "forms": []}))
    with pytest.raises(SchemaMismatch):
        forms.load_fixtures(path)


def test_descriptor_requires_core_fields():
    with pytest.raises(SchemaMismatch):
        forms.FormDescriptor.from_json({"label": "x", "N": 3})


def test_prime_index_override(fixtures):
    d = fixtures["4.17.b.b"]
    assert d.prime_index(7) == 3
    assert d.prime_index(7, 1) == 1
    assert d.prime_index(11) == 1


def test_client_fetches_and_caches(tmp_path):
    client, http, sleeps = _client(tmp_path, Resp(200, PAYLOAD), Resp(200, PAYLOAD))
    desc = client.fetch("11.2.a.a")
    assert (desc.N, desc.k, desc.flavor, desc.degree) == (11, 2, "gamma0", 1)
    assert desc.traces == {2: "-2", 3: "-1", 5: "1", 7: "-2", 13: "4"}
    cache = tmp_path / "lmfdb-11.2.a.a.json"
    before = cache.stat().st_mtime_ns
    assert client.fetch("11.2.a.a") == desc
    assert cache.stat().st_mtime_ns == before
    assert client.cached("11.2.a.a") == desc
    assert sleeps == []


def test_client_retries_with_backoff(tmp_path):
    client, http, sleeps = _client(tmp_path, ConnectionError("down"), Resp(503), Resp(200, PAYLOAD))
    assert client.fetch("11.2.a.a").N == 11
    assert http.calls == 3
    assert sleeps == [0.5, 1.0]


def test_client_gives_up_after_three_attempts(tmp_path):
    client, http, sleeps = _client(tmp_path, Resp(500), Resp(502), TimeoutError("slow"))
    with pytest.raises(ImtError, match="3 attempts"):
        client.fetch("11.2.a.a")
    assert http.calls == 3 and len(sleeps) == 2


def test_client_not_found(tmp_path):
    client, http, _ = _client(tmp_path, Resp(404))
    with pytest.raises(NotFound):
        client.fetch("1.1.a.a")
    assert http.calls == 1


@pytest.mark.parametrize("payload, err", [({"data": []}, NotFound), ({"data": [{"label": "x"}]}, SchemaMismatch), ({"data": [{"label": "x", "level": "a", "weight": 2, "dim": 1, "traces": []}]}, SchemaMismatch)])
def test_schema_problems(tmp_path, payload, err):
    client, _, _ = _client(tmp_path, Resp(200, payload))
    with pytest.raises(err):
        client.fetch("x")


def test_quadratic_character_maps_to_signed_discriminant():
    row = dict(PAYLOAD["data"][0], label="7.3.b.a", level=7, weight=3, char_order=2, char_conductor=7)
    d = forms.descriptor_from_lmfdb({"data": [row]})
    assert (d.flavor, d.disc) == ("gamma0", -7)
    row = dict(row, char_order=3)
    assert forms.descriptor_from_lmfdb({"data": [row]}).flavor == "gamma1"


def test_fetch_form_prefers_fixtures(tmp_path, fixtures):
    client, http, _ = _client(tmp_path)
    assert forms.fetch_form("27.4.a.b", fixtures, client).N == 27
    assert http.calls == 0


def test_fetch_form_no_net(tmp_path, fixtures):
    client, http, _ = _client(tmp_path, Resp(200, PAYLOAD))
    with pytest.raises(NotFound):
        forms.fetch_form("11.2.a.a", fixtures, client, no_net=True)
    assert http.calls == 0
    assert forms.fetch_form("11.2.a.a", fixtures, client).N == 11
    # now cached, so the network flag no longer matters
    assert forms.fetch_form("11.2.a.a", fixtures, client, no_net=True).N == 11


def test_fetched_form_runs_through_the_pipeline(tmp_path):
    desc = forms.descriptor_from_lmfdb(PAYLOAD)
    sym = forms.find_symbol(desc, 1, tmp_path)
    assert forms.check_consistency(desc, sym) == []
    bad = forms.FormDescriptor.from_json(dict(desc.to_json(), traces={"2": "-2", "3": "5"}))
    with pytest.raises(forms.StageError, match="eigen"):
        forms.find_symbol(bad, 1, tmp_path)
    assert list(tmp_path.glob("space-*.json"))


def test_fixture_descriptors_are_consistent(fixtures):
    desc = fixtures["27.4.a.b"]
    sym = forms.find_symbol(desc, 1)
    assert forms.check_consistency(desc, sym) == []


def test_atomic_write_replaces(tmp_path):
    path = tmp_path / "a" / "b.txt"
    forms.atomic_write(path, "one")
    forms.atomic_write(path, "two")
    assert path.read_text() == "two"
    assert [p.name for p in path.parent.iterdir()] == ["b.txt"]


@pytest.mark.parametrize("kwargs", [{"p": 13}, {"nmax": 5}, {"nmax": 4}, {"nmax": -1}, {"j": -1}])
def test_job_guards(kwargs):
    with pytest.raises(OutOfRange):
        JobSpec(**kwargs).validate()


def test_job_guards_per_form(fixtures):
    JobSpec(nmax=4, deep=True).validate([fixtures["27.4.a.b"]])
    with pytest.raises(OutOfRange):
        JobSpec(j=3).validate([fixtures["27.4.a.b"]])
    big = forms.FormDescriptor("big", 100, 2)
    with pytest.raises(OutOfRange):
        JobSpec().validate([big])


def test_c_matrix_inputs_need_rational_data(fixtures):
    assert FormRun(fixtures["G1N7k3A"], JobSpec(p=5)).eps_p() == -1
    run = FormRun(fixtures["G1N13k2A"], JobSpec(p=7))
    with pytest.raises(OutOfRange):
        run.eps_p()
    run = FormRun(fixtures["9.8.a.b"], JobSpec(p=5))
    with pytest.raises(OutOfRange):
        run.a_p_int()


def test_report_json_is_deterministic(fixtures):
    a = FormRun(fixtures["27.4.a.b"], JobSpec(p=5, nmax=2)).report()
    b = FormRun(fixtures["27.4.a.b"], JobSpec(p=5, nmax=2)).report()
    assert report_json(a) == report_json(b)
    assert json.loads(report_json({"x": float("inf")})) == {"x": "inf"}
