from .client import (
    BadCredentials,
    ClientConfig,
    ConnectionFailed,
    PassportClient,
    RequestFailed,
    RetryExhausted,
    connect,
)

__all__ = [
    "BadCredentials",
    "ClientConfig",
    "ConnectionFailed",
    "PassportClient",
    "RequestFailed",
    "RetryExhausted",
    "connect",
]
