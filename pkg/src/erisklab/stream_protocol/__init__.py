from .client import EarlyClient
from .http import HttpConnection, LocalConnection, ServerUnreachable, start_http_server, stop_http_server
from .runlog import (
    RunLogError,
    RunLogRecord,
    UserTrace,
    export_run_logs,
    read_records,
    replay_run_logs,
    traces_from_records,
)
from .server import MockServer, ProtocolError, TeamState

__all__ = [
    "EarlyClient", "HttpConnection", "LocalConnection", "MockServer", "ProtocolError",
    "RunLogError", "RunLogRecord", "ServerUnreachable", "TeamState", "UserTrace",
    "export_run_logs", "read_records", "replay_run_logs", "start_http_server",
    "stop_http_server", "traces_from_records",
]
