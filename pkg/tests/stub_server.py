"""In-process HTTP stub implementing the chat-completion and fine-tune
endpoint subset, for client integration tests."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class StubState:
    def __init__(self):
        self.chat_content = "Thought: stub.\nAction: finish[stub]"
        self.chat_usage = {"prompt_tokens": 7, "completion_tokens": 5, "total_tokens": 12}
        self.fail_next = 0          # respond 500 to this many chat requests
        self.hard_status = None     # non-retryable status to return once
        self.chat_requests: list[dict] = []
        self.uploads: list[bytes] = []
        self.job_statuses = ["validating_files", "running", "succeeded"]
        self.job_polls = 0
        self.lock = threading.Lock()


def _extract_multipart_file(body: bytes) -> bytes:
    # requests frames each part as headers + CRLFCRLF + content + CRLF--boundary;
    # the uploaded file is the part whose headers carry a filename.
    for part in body.split(b"\r\n--"):
        header_end = part.find(b"\r\n\r\n")
        if header_end == -1:
            continue
        if b"filename=" in part[:header_end]:
            return part[header_end + 4:]
    return b""


class StubHandler(BaseHTTPRequestHandler):
    state: StubState  # set by make_server

    def log_message(self, *args):  # silence test output
        pass

    def _send_json(self, payload: dict, status: int = 200) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
        state = self.state
        if self.path == "/v1/chat/completions":
            with state.lock:
                state.chat_requests.append(json.loads(body))
                if state.hard_status is not None:
                    status, state.hard_status = state.hard_status, None
                    self._send_json({"error": {"message": "bad request"}}, status)
                    return
                if state.fail_next > 0:
                    state.fail_next -= 1
                    self._send_json({"error": {"message": "overloaded"}}, 500)
                    return
            self._send_json(
                {
                    "choices": [{"message": {"role": "assistant", "content": state.chat_content}}],
                    "usage": state.chat_usage,
                }
            )
        elif self.path == "/v1/files":
            content = _extract_multipart_file(body)
            with state.lock:
                state.uploads.append(content)
            for line in content.splitlines():
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    self._send_json({"error": {"message": "invalid JSONL in training file"}}, 400)
                    return
                if "messages" not in record:
                    self._send_json({"error": {"message": "records must carry messages"}}, 400)
                    return
            self._send_json({"id": "file-stub-1", "object": "file"})
        elif self.path == "/v1/fine_tuning/jobs":
            self._send_json({"id": "ftjob-stub-1", "status": "validating_files"})
        else:
            self._send_json({"error": {"message": f"no handler for {self.path}"}}, 404)

    def do_GET(self):
        state = self.state
        if self.path.startswith("/v1/fine_tuning/jobs/"):
            with state.lock:
                idx = min(state.job_polls, len(state.job_statuses) - 1)
                state.job_polls += 1
                status = state.job_statuses[idx]
            payload = {"id": "ftjob-stub-1", "status": status}
            if status == "succeeded":
                payload["fine_tuned_model"] = "ft:stub-model"
            self._send_json(payload)
        else:
            self._send_json({"error": {"message": f"no handler for {self.path}"}}, 404)


def make_server() -> tuple[ThreadingHTTPServer, StubState, str]:
    state = StubState()
    handler = type("BoundStubHandler", (StubHandler,), {"state": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, state, f"http://127.0.0.1:{server.server_address[1]}"
