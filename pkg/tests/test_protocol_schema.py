"""Wire bodies recorded from the mock suite validate against the schema."""

import json
from importlib import resources

import jsonschema
import pytest

from scenesmith.recording import record_mock_exchanges


@pytest.fixture(scope="module")
def schema_document() -> dict:
    text = resources.files("scenesmith.assets").joinpath("protocol_schema.json").read_text("utf-8")
    return json.loads(text)


@pytest.fixture(scope="module")
def exchanges() -> list[dict]:
    return record_mock_exchanges()


def _validator(document: dict, kind: str, side: str) -> jsonschema.Draft202012Validator:
    schema = dict(document)
    schema["$ref"] = f"#/kinds/{kind}/{side}"
    return jsonschema.Draft202012Validator(schema)


def test_schema_itself_is_valid(schema_document):
    jsonschema.Draft202012Validator.check_schema(schema_document)


def test_every_kind_covered(schema_document, exchanges):
    assert {e["kind"] for e in exchanges} == set(schema_document["kinds"])


def test_requests_validate(schema_document, exchanges):
    for exchange in exchanges:
        validator = _validator(schema_document, exchange["kind"], "request")
        errors = list(validator.iter_errors(exchange["request"]))
        assert not errors, (exchange["kind"], [e.message for e in errors])


def test_responses_validate(schema_document, exchanges):
    for exchange in exchanges:
        validator = _validator(schema_document, exchange["kind"], "response")
        errors = list(validator.iter_errors(exchange["response"]))
        assert not errors, (exchange["kind"], [e.message for e in errors])


def test_semantic_error_exchange_present(exchanges):
    assert any(e["response"]["status"] == "error" for e in exchanges)


def test_exchanges_deterministic():
    first = json.dumps(record_mock_exchanges(), sort_keys=True)
    second = json.dumps(record_mock_exchanges(), sort_keys=True)
    assert first == second
