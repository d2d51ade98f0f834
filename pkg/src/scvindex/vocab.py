"""Controlled vocabularies for demographic fields and US state keys."""

from __future__ import annotations

from .errors import VocabularyError

GENDERS = ("Female", "Male")

RACE_ETHNICITY = (
    "White, non-Hispanic",
    "Black, non-Hispanic",
    "Other, non-Hispanic",
    "2+, non-Hispanic",
    "Asian, non-Hispanic",
    "Hispanic",
)

AGE_GROUPS = ("18-24", "25-29", "30-44", "45-49", "50-54", "55-64", "65+")

# 50 states plus the District of Columbia.
STATE_NAMES = {
    "AL": "Alabama", "AK": "Alaska", "AZ": "Arizona", "AR": "Arkansas",
    "CA": "California", "CO": "Colorado", "CT": "Connecticut", "DE": "Delaware",
    "DC": "District of Columbia", "FL": "Florida", "GA": "Georgia", "HI": "Hawaii",
    "ID": "Idaho", "IL": "Illinois", "IN": "Indiana", "IA": "Iowa",
    "KS": "Kansas", "KY": "Kentucky", "LA": "Louisiana", "ME": "Maine",
    "MD": "Maryland", "MA": "Massachusetts", "MI": "Michigan", "MN": "Minnesota",
    "MS": "Mississippi", "MO": "Missouri", "MT": "Montana", "NE": "Nebraska",
    "NV": "Nevada", "NH": "New Hampshire", "NJ": "New Jersey", "NM": "New Mexico",
    "NY": "New York", "NC": "North Carolina", "ND": "North Dakota", "OH": "Ohio",
    "OK": "Oklahoma", "OR": "Oregon", "PA": "Pennsylvania", "RI": "Rhode Island",
    "SC": "South Carolina", "SD": "South Dakota", "TN": "Tennessee", "TX": "Texas",
    "UT": "Utah", "VT": "Vermont", "VA": "Virginia", "WA": "Washington",
    "WV": "West Virginia", "WI": "Wisconsin", "WY": "Wyoming",
}

_NAME_TO_CODE = {name.casefold(): code for code, name in STATE_NAMES.items()}


def state_code(value: str) -> str:
    """Canonicalize a state key (two-letter code or full name) to its code."""
    key = value.strip()
    if key.upper() in STATE_NAMES:
        return key.upper()
    code = _NAME_TO_CODE.get(key.casefold())
    if code is None:
        raise VocabularyError(f"unknown state: {value!r}")
    return code


def check_demographic(field: str, value: str) -> str:
    """Validate one demographic value against its controlled vocabulary."""
    value = value.strip()
    if field == "gender":
        allowed = GENDERS
    elif field == "race_ethnicity":
        allowed = RACE_ETHNICITY
    elif field == "age_group":
        allowed = AGE_GROUPS
    elif field == "state":
        return state_code(value)
    else:
        raise VocabularyError(f"unknown demographic field: {field!r}")
    for item in allowed:
        if item.casefold() == value.casefold():
            return item
    raise VocabularyError(f"unknown {field}: {value!r}")
