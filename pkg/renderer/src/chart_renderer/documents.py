"""Loading and validation of the upstream JSON chart documents.

The renderer is a pure consumer: it checks the schema version and the fields
it needs, ignores unknown fields, and never recomputes ranks, significance,
or sort order.
"""

import json

SUPPORTED_SCHEMA = 1

SIG_CLASSES = ("neg_sig", "insig", "pos_sig")


class SchemaError(ValueError):
    """The document does not match a supported schema."""


def load_document(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return doc


def _check_header(doc: dict, kind: str) -> None:
    version = doc.get("schema_version")
    if version != SUPPORTED_SCHEMA:
        raise SchemaError(
            f"unsupported schema_version {version!r} (renderer supports {SUPPORTED_SCHEMA})"
        )
    if doc.get("kind") != kind:
        raise SchemaError(f"document kind {doc.get('kind')!r}, expected {kind!r}")


def validate_spec_chart(doc: dict) -> dict:
    _check_header(doc, "spec_chart")
    regions = doc.get("regions")
    if not isinstance(regions, list) or not regions:
        raise SchemaError("spec_chart document needs a non-empty 'regions' list")
    for region in regions:
        if "model" not in region or not isinstance(region.get("cells"), list):
            raise SchemaError("each region needs 'model' and a 'cells' list")
        for cell in region["cells"]:
            for field in ("beta1", "ci_low", "ci_high", "sig_class"):
                if field not in cell:
                    raise SchemaError(f"spec_chart cell missing {field!r}")
            if cell["sig_class"] not in SIG_CLASSES:
                raise SchemaError(f"unknown sig_class {cell['sig_class']!r}")
    return doc


def validate_bumpline(doc: dict) -> dict:
    _check_header(doc, "bumpline")
    products = doc.get("products")
    columns = doc.get("columns")
    if not isinstance(products, list) or not products:
        raise SchemaError("bumpline document needs a non-empty 'products' list")
    if not isinstance(columns, list) or not columns:
        raise SchemaError("bumpline document needs a non-empty 'columns' list")
    for col in columns:
        if not isinstance(col.get("ranks"), dict):
            raise SchemaError("each bumpline column needs a 'ranks' mapping")
    return doc
