"""Adapter-side errors, mapped onto wire error kinds by the server."""


class AdapterError(Exception):
    wire_kind = "bad_request"


class FeatureShapeError(AdapterError):
    """Region features do not match the configured box count / dimension."""


class UnknownImage(AdapterError):
    """No feature file for the requested image id."""

    wire_kind = "unknown_image"


class BackendUnavailable(AdapterError):
    """Model weights not loaded or resource missing."""

    wire_kind = "unavailable"
