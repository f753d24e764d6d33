"""Temporal-expression grammar and the address parser."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cohortmap.normalize import (
    UnparseableAddress,
    load_temporal_tables,
    normalize_temporal,
    parse_address,
)
from cohortmap.records import AgeCohort, cohort_of


class TestTemporalGrammar:
    def test_early_19c_maps_to_pre_1919(self):
        result = normalize_temporal("early 19C")
        assert result.cohort_hint is AgeCohort.PRE_1919
        assert result.rule_id == "century-phrase"

    def test_mid_20c_maps_to_1951_1978(self):
        result = normalize_temporal("mid-20C")
        assert result.cohort_hint is AgeCohort.C1951_1978

    def test_circa_prefix(self):
        result = normalize_temporal("um 1925")
        assert result.year == 1925
        assert result.rule_id == "circa"

    def test_range_midpoint(self):
        result = normalize_temporal("1890–1900")
        assert result.year == 1895
        assert result.rule_id == "range"

    def test_range_midpoint_rounds_down(self):
        assert normalize_temporal("1919–1948").year == 1933

    def test_no_match_is_a_value(self):
        result = normalize_temporal("gothic portal")
        assert result.year is None
        assert result.cohort_hint is None
        assert result.rule_id == "no-match"

    @pytest.mark.parametrize(
        ("text", "year"),
        [
            ("1950er", 1955),
            ("1950er Jahre", 1955),
            ("1950s", 1955),
            ("ca. 1930", 1930),
            ("c. 1871", 1871),
            ("erbaut 1890", 1890),
            ("Wohnhaus von 1925, erweitert 1955", 1925),
            ("1895", 1895),
        ],
    )
    def test_year_extraction(self, text, year):
        assert normalize_temporal(text).year == year

    @pytest.mark.parametrize("text", ["", "   ", "unreadable", "no-match text", "0842", "2500"])
    def test_no_match_cases(self, text):
        assert not normalize_temporal(text).matched

    def test_idempotent_on_canonical_output(self):
        first = normalize_temporal("1895")
        again = normalize_temporal(str(first.year))
        assert again.year == first.year

    @given(st.integers(min_value=1000, max_value=2025))
    def test_idempotence_property(self, year):
        assert normalize_temporal(str(year)).year == year

    def test_german_century_phrases(self):
        assert normalize_temporal("Mitte des 20. Jahrhunderts").cohort_hint is AgeCohort.C1951_1978
        assert normalize_temporal("Ende des 19. Jahrhunderts").cohort_hint is AgeCohort.PRE_1919
        assert normalize_temporal("Anfang des 21. Jahrhunderts").cohort_hint is AgeCohort.POST_2000

    def test_year_and_hint_always_consistent(self):
        for text in ["1895", "um 1925", "1890–1900", "1950er", "mid-20C", "erbaut 1890"]:
            result = normalize_temporal(text)
            if result.year is not None and result.cohort_hint is not None:
                assert cohort_of(result.year) is result.cohort_hint

    def test_century_table_exhaustively_consistent(self):
        """Each table entry's cohort equals the cohort of its band midpoint
        (clamped into the plausibility window for future-reaching bands)."""
        from cohortmap.records import plausible_year_window

        lo, hi = plausible_year_window()
        table = load_temporal_tables()
        assert len(table["century_phrases"]) >= 45
        for entry in table["century_phrases"]:
            midpoint = min(max((entry["year_start"] + entry["year_end"]) // 2, lo), hi)
            hint = normalize_temporal(entry["phrase"]).cohort_hint
            assert hint is cohort_of(midpoint), entry


class TestAddressParser:
    def test_comma_form(self):
        address = parse_address("Templergraben 55, Aachen")
        assert (address.street, address.house_number, address.city) == (
            "Templergraben",
            "55",
            "Aachen",
        )

    def test_postcode_form(self):
        address = parse_address("Am Markt 12a 52062 Aachen")
        assert (address.street, address.house_number, address.city) == (
            "Am Markt",
            "12a",
            "Aachen",
        )

    def test_city_only_is_unparseable(self):
        with pytest.raises(UnparseableAddress):
            parse_address("Aachen")

    @pytest.mark.parametrize(
        ("text", "street", "number", "city"),
        [
            ("Straße des 17. Juni 135, Berlin", "Straße des 17. Juni", "135", "Berlin"),
            ("Hauptstraße 5-7, Köln", "Hauptstraße", "5-7", "Köln"),
            ("Am Markt 12a, 52062 Aachen", "Am Markt", "12a", "Aachen"),
            ("Pontstraße 41 Aachen", "Pontstraße", "41", "Aachen"),
        ],
    )
    def test_varied_forms(self, text, street, number, city):
        address = parse_address(text)
        assert (address.street, address.house_number, address.city) == (street, number, city)

    @pytest.mark.parametrize("text", ["", "55", "Templergraben", "55, Aachen"])
    def test_unparseable_inputs(self, text):
        with pytest.raises(UnparseableAddress):
            parse_address(text)

    @given(
        street=st.sampled_from(["Templergraben", "Am Markt", "Ponttor Weg"]),
        number=st.integers(min_value=1, max_value=999),
        suffix=st.sampled_from(["", "a", "b"]),
        city=st.sampled_from(["Aachen", "Bad Honnef"]),
    )
    def test_never_empty_street_or_city(self, street, number, suffix, city):
        address = parse_address(f"{street} {number}{suffix}, {city}")
        assert address.street
        assert address.city
        assert address.street == street
        assert address.city == city
