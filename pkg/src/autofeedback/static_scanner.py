"""Pre-execution scanning of parsed requests against the documentation.

Detection runs the stages in ascending order and stops at the first hit:
unparseable output, then API name, then parameter names, then value types.
Within a family the sub-checks run selection -> literal -> semantic -> other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .doc_model import ApiDocument, ApiSpec, lookup_api, normalize_name
from .errors import NoErrorFindingError, UnknownTruthApiError
from .request_codec import (
    ApiRequest,
    ParseOutcome,
    serialize_value,
    type_matches,
    values_equal,
)
from .retrieval import RelevantSet, SimilarityModel, retrieve_relevant_apis

__all__ = [
    "ErrorType",
    "DetectionFinding",
    "FeedbackPart",
    "StaticFeedback",
    "detect",
    "classify_against_truth",
    "render_feedback",
    "REGENERATE_SENTENCE",
]


class ErrorType(str, Enum):
    """Error taxonomy for generated API requests."""

    E1 = "E1"
    E2_1 = "E2.1"
    E2_2 = "E2.2"
    E2_3 = "E2.3"
    E2_OTHER = "E2.other"
    E3_1 = "E3.1"
    E3_2 = "E3.2"
    E3_3 = "E3.3"
    E3_OTHER = "E3.other"
    E4_1 = "E4.1"
    E4_OTHER = "E4.other"
    NONE = "none"

    @property
    def family(self) -> str:
        """``E1``/``E2``/``E3``/``E4``, or ``none``."""
        return self.value.split(".")[0] if self is not ErrorType.NONE else "none"


@dataclass(frozen=True)
class DetectionFinding:
    """One detection result with the return values the feedback needs.

    Field population follows the error type: E1 carries no names;
    selection and other errors carry the offending name only; literal and
    semantic errors add the suggested replacement; value errors carry the
    offending value (rendered as text) plus the parameter description.
    """

    error_type: ErrorType
    offending_name: str | None = None
    suggested_name: str | None = None
    param_description: str | None = None
    relevant_apis: RelevantSet = field(default_factory=RelevantSet)


def _match_name(
    name: str, doc: ApiDocument, model: SimilarityModel, threshold: float
) -> tuple[ErrorType, str | None]:
    """Name sub-cascade: selection, then literal, then semantic match."""
    if any(a.name == name for a in doc.apis):
        return ErrorType.E2_1, None
    normalized = normalize_name(name)
    for api in doc.apis:
        if normalize_name(api.name) == normalized:
            return ErrorType.E2_2, api.name
    best_name, best_score = None, threshold
    for api in doc.apis:
        score = model.score(name, api.name)
        if score > best_score:
            best_name, best_score = api.name, score
    if best_name is not None:
        return ErrorType.E2_3, best_name
    return ErrorType.E2_OTHER, None


def _match_param(
    key: str, named: ApiSpec, doc: ApiDocument, model: SimilarityModel,
    threshold: float,
) -> tuple[ErrorType, str | None]:
    """Parameter sub-cascade: selection against other APIs, literal match
    against other APIs, semantic match against the named API's own params."""
    other_params = [
        p for api in doc.apis if api.name != named.name for p in api.params
    ]
    if any(p.name == key for p in other_params):
        return ErrorType.E3_1, None
    normalized = normalize_name(key)
    for p in other_params:
        if normalize_name(p.name) == normalized:
            return ErrorType.E3_2, p.name
    best_name, best_score = None, threshold
    for p in named.params:
        score = model.score(key, p.name)
        if score > best_score:
            best_name, best_score = p.name, score
    if best_name is not None:
        return ErrorType.E3_3, best_name
    return ErrorType.E3_OTHER, None


def _first_unknown_key(req: ApiRequest, spec: ApiSpec) -> str | None:
    known = set(spec.param_names)
    for key in req.arg_names:
        if key not in known:
            return key
    return None


def _first_missing_required(req: ApiRequest, spec: ApiSpec) -> str | None:
    present = set(req.arg_names)
    for p in spec.params:
        if p.required and p.name not in present:
            return p.name
    return None


def _first_type_mismatch(
    req: ApiRequest, spec: ApiSpec, *, int_widens_to_float: bool, tuple_as_list: bool
) -> tuple[str, str] | None:
    """Return (rendered value, parameter description) of the first bad arg."""
    for key, value in req.args:
        param = spec.param(key)
        if param is None:
            continue
        if not type_matches(
            value,
            param.value_type,
            int_widens_to_float=int_widens_to_float,
            tuple_as_list=tuple_as_list,
        ):
            return serialize_value(value), param.description
    return None


def detect(
    outcome: ParseOutcome,
    instruction: str,
    doc: ApiDocument,
    model: SimilarityModel,
    k: int = 1,
    threshold: float = 0.5,
    *,
    int_widens_to_float: bool = True,
    tuple_as_list: bool = False,
) -> DetectionFinding:
    """Scan a parsed request and return the first error found, if any.

    The retrieved relevant set decides whether the API name matches the
    instruction; the name and parameter cascades then pin down the cause.
    A finding of ``NONE`` means the request name is relevant, every key is
    documented and every value type is compatible.
    """
    relevant = retrieve_relevant_apis(instruction, doc, model, k)

    if not outcome.ok:
        return DetectionFinding(ErrorType.E1, relevant_apis=relevant)
    req = outcome.request
    assert req is not None

    if req.name not in relevant:
        error_type, suggested = _match_name(req.name, doc, model, threshold)
        return DetectionFinding(
            error_type,
            offending_name=req.name,
            suggested_name=suggested,
            relevant_apis=relevant,
        )

    named = lookup_api(doc, req.name)
    assert named is not None  # relevant-set names come from the document

    offender = _first_unknown_key(req, named)
    if offender is not None:
        error_type, suggested = _match_param(offender, named, doc, model, threshold)
        return DetectionFinding(
            error_type,
            offending_name=offender,
            suggested_name=suggested,
            relevant_apis=relevant,
        )
    missing = _first_missing_required(req, named)
    if missing is not None:
        return DetectionFinding(
            ErrorType.E3_OTHER, offending_name=missing, relevant_apis=relevant
        )

    mismatch = _first_type_mismatch(
        req, named, int_widens_to_float=int_widens_to_float, tuple_as_list=tuple_as_list
    )
    if mismatch is not None:
        value_text, description = mismatch
        return DetectionFinding(
            ErrorType.E4_1,
            offending_name=value_text,
            param_description=description,
            relevant_apis=relevant,
        )

    return DetectionFinding(ErrorType.NONE, relevant_apis=relevant)


def classify_against_truth(
    generated: ParseOutcome,
    truth: ApiRequest,
    doc: ApiDocument,
    model: SimilarityModel,
    threshold: float = 0.5,
    *,
    int_widens_to_float: bool = True,
    tuple_as_list: bool = False,
) -> ErrorType:
    """Label a generated request against its ground truth.

    Same cascade as :func:`detect`, with the ground-truth request as the
    correctness baseline instead of the retrieved set. A request that is
    well formed and type-correct but differs from the truth in argument
    values (or argument choice) is the residual value error.
    """
    truth_spec = lookup_api(doc, truth.name)
    if truth_spec is None:
        raise UnknownTruthApiError(f"ground-truth API {truth.name!r} not in document")

    if not generated.ok:
        return ErrorType.E1
    req = generated.request
    assert req is not None

    if req.name != truth.name:
        if any(api.name == req.name for api in doc.apis):
            return ErrorType.E2_1
        if normalize_name(req.name) == normalize_name(truth.name):
            return ErrorType.E2_2
        if model.score(req.name, truth.name) > threshold:
            return ErrorType.E2_3
        return ErrorType.E2_OTHER

    offender = _first_unknown_key(req, truth_spec)
    if offender is not None:
        error_type, _ = _match_param(offender, truth_spec, doc, model, threshold)
        return error_type
    if _first_missing_required(req, truth_spec) is not None:
        return ErrorType.E3_OTHER

    if (
        _first_type_mismatch(
            req,
            truth_spec,
            int_widens_to_float=int_widens_to_float,
            tuple_as_list=tuple_as_list,
        )
        is not None
    ):
        return ErrorType.E4_1

    gen_args = dict(req.args)
    truth_args = dict(truth.args)
    if gen_args.keys() != truth_args.keys():
        return ErrorType.E4_OTHER
    for key, value in truth_args.items():
        if not values_equal(
            gen_args[key], value, int_widens_to_float=int_widens_to_float
        ):
            return ErrorType.E4_OTHER
    return ErrorType.NONE


class FeedbackPart(Enum):
    DECLARE = "declare"
    LOCATE = "locate"
    EXCLUDE = "exclude"
    SUGGEST = "suggest"
    REGENERATE = "regenerate"


@dataclass(frozen=True)
class StaticFeedback:
    """Rendered corrective prompt plus the template parts it contains."""

    text: str
    parts_present: frozenset[FeedbackPart]


DECLARE_SENTENCE = "The API request you generated contains an error."
REGENERATE_SENTENCE = (
    "Please regenerate the API request between <<API>> and <</API>>."
)

_LOCATE = {
    "E2": "The error is in the API name: you used '{offending}'.",
    "E3": "The error is in the parameter name '{offending}'.",
    "E4": "The error is in the parameter value {offending}.",
}

_EXCLUDE = {
    ErrorType.E2_1: "The request format itself is correct.",
    ErrorType.E2_2: "The API name is not a selection error.",
    ErrorType.E2_3: "The API name is not a selection error or a formatting error.",
    ErrorType.E2_OTHER: (
        "The API name is not a selection error, a formatting error, or a"
        " semantically similar name."
    ),
    ErrorType.E3_1: "The API name is correct.",
    ErrorType.E3_2: "The parameter name is not a selection error.",
    ErrorType.E3_3: (
        "The parameter name is not a selection error or a formatting error."
    ),
    ErrorType.E3_OTHER: (
        "The parameter name is not a selection error, a formatting error, or a"
        " semantically similar name."
    ),
    ErrorType.E4_1: "The API name and all parameter names are correct.",
    ErrorType.E4_OTHER: (
        "The API name, the parameter names, and the value types are correct."
    ),
}


def _suggest_sentence(finding: DetectionFinding) -> str:
    e = finding.error_type
    offending = finding.offending_name
    suggested = finding.suggested_name
    top = finding.relevant_apis.names[0] if finding.relevant_apis.names else None
    if e is ErrorType.E1:
        return (
            "Your output did not contain a parseable API request in the format"
            " APINAME(key1=value1, key2=value2, ...)."
        )
    if e is ErrorType.E2_1:
        text = (
            f"'{offending}' exists in the documentation but does not match the"
            " user instruction; you selected the wrong API."
        )
        if top is not None and top != offending:
            text += f" The API most relevant to the instruction is '{top}'."
        return text
    if e is ErrorType.E2_2:
        return (
            f"'{offending}' uses the wrong naming format; the documented API"
            f" is named '{suggested}'."
        )
    if e is ErrorType.E2_3:
        return (
            f"'{offending}' does not exist; the semantically closest documented"
            f" API is '{suggested}'."
        )
    if e is ErrorType.E2_OTHER:
        text = f"'{offending}' does not appear in the API documentation."
        if top is not None:
            text += f" The API most relevant to the instruction is '{top}'."
        return text
    if e is ErrorType.E3_1:
        return (
            f"'{offending}' is a parameter of a different API, not of the API"
            " you called."
        )
    if e is ErrorType.E3_2:
        return (
            f"'{offending}' uses the wrong naming format; the documented"
            f" parameter is named '{suggested}'."
        )
    if e is ErrorType.E3_3:
        return (
            f"'{offending}' is not documented; the semantically closest"
            f" documented parameter is '{suggested}'."
        )
    if e is ErrorType.E3_OTHER:
        return (
            f"No documented parameter of the called API matches '{offending}'."
            f" If the documentation lists '{offending}' as required, include"
            " it; otherwise remove or replace it."
        )
    # E4 family: the description of the documented parameter guides the fix.
    return (
        f"The value {offending} does not match the documented parameter type."
        f" Parameter description: {finding.param_description}"
    )


def render_feedback(finding: DetectionFinding, doc: ApiDocument) -> StaticFeedback:
    """Render the five-part corrective prompt for a non-empty finding.

    Declare and Regenerate are always present; Exclude is omitted for the
    parse error, which has no earlier stage to rule out.
    """
    if finding.error_type is ErrorType.NONE:
        raise NoErrorFindingError("cannot render feedback for a clean request")

    parts: list[str] = [DECLARE_SENTENCE]
    present = {FeedbackPart.DECLARE, FeedbackPart.LOCATE, FeedbackPart.SUGGEST,
               FeedbackPart.REGENERATE}

    if finding.error_type is ErrorType.E1:
        parts.append("No parseable API request was found in your output.")
    else:
        parts.append(
            _LOCATE[finding.error_type.family].format(offending=finding.offending_name)
        )
        parts.append(_EXCLUDE[finding.error_type])
        present.add(FeedbackPart.EXCLUDE)

    parts.append(_suggest_sentence(finding))
    parts.append(REGENERATE_SENTENCE)
    return StaticFeedback(" ".join(parts), frozenset(present))
