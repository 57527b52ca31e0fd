"""The eight canonical activity categories and finer-label mapping."""

ACTIVITY_CATEGORIES = (
    "life services",
    "sports & leisure",
    "employment",
    "tourism",
    "residence",
    "shopping",
    "dining",
    "travel",
)

CATEGORY_SET = frozenset(ACTIVITY_CATEGORIES)

# Finer POI labels collapse onto the canonical eight. Extend as datasets need.
CATEGORY_ALIASES = {
    "bank": "life services",
    "pharmacy": "life services",
    "hospital": "life services",
    "clinic": "life services",
    "post office": "life services",
    "hair salon": "life services",
    "laundry": "life services",
    "gym": "sports & leisure",
    "fitness": "sports & leisure",
    "cinema": "sports & leisure",
    "park": "sports & leisure",
    "stadium": "sports & leisure",
    "playground": "sports & leisure",
    "office": "employment",
    "company": "employment",
    "factory": "employment",
    "school": "employment",
    "university": "employment",
    "museum": "tourism",
    "gallery": "tourism",
    "landmark": "tourism",
    "viewpoint": "tourism",
    "temple": "tourism",
    "home": "residence",
    "apartment": "residence",
    "housing": "residence",
    "hotel": "residence",
    "mall": "shopping",
    "supermarket": "shopping",
    "market": "shopping",
    "store": "shopping",
    "boutique": "shopping",
    "restaurant": "dining",
    "cafe": "dining",
    "bar": "dining",
    "canteen": "dining",
    "food court": "dining",
    "street food": "dining",
    "station": "travel",
    "bus stop": "travel",
    "parking": "travel",
}


class UnknownCategoryError(ValueError):
    """Raised when a label cannot be mapped onto the eight categories."""


def canonical_category(label: str) -> str:
    """Map a category label (canonical or finer) onto one of the eight."""
    key = label.strip().lower()
    if key in CATEGORY_SET:
        return key
    if key in CATEGORY_ALIASES:
        return CATEGORY_ALIASES[key]
    raise UnknownCategoryError(f"unknown activity category: {label!r}")
