import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rescoh.errors import AlignmentError, FetchError, InvalidInputError, OfflineError, ParseError
from rescoh.ingestion import (
    FRED_CSV_URL,
    DatedSeries,
    align_drop_missing,
    fetch_series,
    parse_fred_csv,
    preprocess,
)

START, END = dt.date(2018, 1, 1), dt.date(2019, 12, 31)


class TestParse:
    def test_example(self):
        s = parse_fred_csv("DATE,VIXCLS\n2018-01-02,9.77\n2018-01-03,.\n")
        assert s.id == "VIXCLS"
        assert s.observations == [(dt.date(2018, 1, 2), 9.77), (dt.date(2018, 1, 3), None)]
        assert s.missing == 1

    def test_header_only(self):
        assert len(parse_fred_csv("DATE,VIXCLS\n")) == 0

    def test_modern_header_and_empty_value(self):
        s = parse_fred_csv("observation_date,GVZCLS\n2019-05-01,\n2019-05-02,12.5\n")
        assert s.id == "GVZCLS" and s.missing == 1

    @pytest.mark.parametrize(
        "text, line",
        [
            ("", 1),
            ("DATE\n", 1),
            ("DATE,X\n2018-13-01,1\n", 2),
            ("DATE,X\n2018-01-01,1\n2018-01-02,abc\n", 3),
            ("DATE,X\n2018-01-02,1\n2018-01-01,2\n", 3),
            ("DATE,X\n2018-01-02,1,5\n", 2),
            ("DATE,X\n2018-01-02,inf\n", 2),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(ParseError) as e:
            parse_fred_csv(text)
        assert e.value.line == line

    @given(
        st.lists(
            st.one_of(st.none(), st.floats(-1e6, 1e6, allow_nan=False)),
            max_size=40,
        )
    )
    def test_round_trip(self, vals):
        dates = np.datetime64("2018-01-01") + np.arange(len(vals))
        values = np.array([np.nan if v is None else v for v in vals], dtype=float)
        s = DatedSeries("VIXCLS", dates, values)
        assert parse_fred_csv(s.to_csv()) == s


def dated(id, days, values):
    return DatedSeries(id, np.datetime64("2018-01-01") + np.asarray(days), np.asarray(values, dtype=float))


class TestAlign:
    def test_identical(self):
        a = dated("A", [0, 1, 2], [1, 2, 3])
        b = dated("B", [0, 1, 2], [4, 5, 6])
        (sa, sb), dates = align_drop_missing([a, b])
        assert len(sa) == len(sb) == 3 and sa.name == "A"

    def test_missing_dropped_everywhere(self):
        a = dated("A", [0, 1, 2, 3], [1, np.nan, 3, 4])
        b = dated("B", [0, 1, 2, 4], [5, 6, 7, 8])
        (sa, sb), dates = align_drop_missing([a, b])
        np.testing.assert_array_equal(sa.values, [1, 3])
        np.testing.assert_array_equal(sb.values, [5, 7])
        assert list(dates.astype(str)) == ["2018-01-01", "2018-01-03"]

    def test_empty_intersection(self):
        with pytest.raises(AlignmentError):
            align_drop_missing([dated("A", [0], [1]), dated("B", [1], [1])])


def test_preprocess(rng):
    s = preprocess(np.cumsum(rng.standard_normal(300)) + 20)
    assert len(s) == 299
    assert abs(s.values.mean()) < 1e-12


class Response:
    def __init__(self, status, text=""):
        self.status_code, self.text = status, text


class Session:
    def __init__(self, *outcomes):
        self.outcomes = list(outcomes)
        self.calls = []

    def get(self, url, params=None, **kw):
        self.calls.append((url, params, kw))
        out = self.outcomes.pop(0)
        if isinstance(out, Exception):
            raise out
        return out


class TestFetch:
    body = "DATE,VIXCLS\n2018-01-02,9.77\n"

    def test_ok(self, monkeypatch):
        monkeypatch.delenv("RESCOH_OFFLINE", raising=False)
        monkeypatch.setenv("RESCOH_HTTP_PROXY", "http://proxy:3128")
        sess = Session(Response(200, self.body))
        assert fetch_series("VIXCLS", START, END, session=sess) == self.body
        url, params, kw = sess.calls[0]
        assert url == FRED_CSV_URL
        assert params == {"id": "VIXCLS", "cosd": "2018-01-01", "coed": "2019-12-31"}
        assert kw["proxies"]["https"] == "http://proxy:3128"

    def test_unknown_id_surfaces_status(self):
        sess = Session(Response(404, "not found"))
        with pytest.raises(FetchError) as e:
            fetch_series("NOSUCHID", START, END, offline=False, session=sess)
        assert e.value.status == 404
        assert len(sess.calls) == 1

    def test_malformed_id(self):
        with pytest.raises(InvalidInputError):
            fetch_series("VIX CLS; rm", START, END, offline=False, session=Session())

    def test_single_retry(self):
        sess = Session(Response(503), Response(200, self.body))
        assert fetch_series("VIXCLS", START, END, offline=False, session=sess, backoff=0) == self.body
        sess = Session(ConnectionError("down"), ConnectionError("down"), Response(200))
        with pytest.raises(FetchError):
            fetch_series("VIXCLS", START, END, offline=False, session=sess, backoff=0)
        assert len(sess.calls) == 2

    def test_offline(self, monkeypatch):
        with pytest.raises(OfflineError):
            fetch_series("VIXCLS", START, END, offline=True, session=Session())
        monkeypatch.setenv("RESCOH_OFFLINE", "1")
        with pytest.raises(OfflineError):
            fetch_series("VIXCLS", START, END, session=Session())
