import base64
import json
import threading
import time
import urllib.request
import urllib.error

import numpy as np
import pytest

from endlessloop.service import serve
from endlessloop.raster import save_image, save_mask
from tests.conftest import make_lattice, make_stripes, rect_mask


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    work = tmp_path_factory.mktemp("service")
    srv = serve("127.0.0.1:0", work_dir=str(work), max_workers=2)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()


def png_b64(save, obj) -> str:
    import tempfile, os

    with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as f:
        path = f.name
    save(path, obj)
    with open(path, "rb") as f:
        data = f.read()
    os.unlink(path)
    return base64.b64encode(data).decode()


def post_json(url, payload):
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def get(url, raw=False):
    try:
        with urllib.request.urlopen(url) as resp:
            body = resp.read()
            return resp.status, body if raw else json.loads(body)
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def job_payload(frame_count=4):
    img = make_stripes(width=200, height=120, period=20)
    mask = rect_mask(200, 120, 20, 12, 180, 108)
    return {
        "image": png_b64(save_image, img),
        "mask": png_b64(save_mask, mask),
        "options": {"direction_deg": 0.0, "frame_count": frame_count},
    }


def wait_done(base, job_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status, record = get(f"{base}/jobs/{job_id}")
        assert status == 200
        if record["state"] in ("done", "failed"):
            return record
        time.sleep(0.3)
    raise AssertionError("job did not finish in time")


class TestService:
    def test_healthz(self, server):
        status, body = get(f"{server}/healthz")
        assert status == 200
        assert body == {"status": "ok"}

    def test_job_lifecycle_and_artifacts(self, server):
        status, body = post_json(f"{server}/jobs", job_payload())
        assert status == 202
        record = wait_done(server, body["id"])
        assert record["state"] == "done"
        assert record["frame_count"] == 4
        assert record["timings"]["total"] > 0
        status, gif = get(f"{server}/jobs/{body['id']}/result.gif", raw=True)
        assert status == 200 and gif[:6] == b"GIF89a"
        status, png = get(f"{server}/jobs/{body['id']}/frames/0.png", raw=True)
        assert status == 200 and png[:8] == b"\x89PNG\r\n\x1a\n"

    def test_identical_payload_hits_cache(self, server):
        payload = job_payload(frame_count=3)
        _, first = post_json(f"{server}/jobs", payload)
        wait_done(server, first["id"])
        _, second = post_json(f"{server}/jobs", payload)
        assert second["id"] == first["id"]

    def test_failed_job_carries_stage_diagnostic(self, server):
        img = make_stripes(width=100, height=80)
        empty = rect_mask(100, 80, 0, 0, 0, 0)
        payload = {
            "image": png_b64(save_image, img),
            "mask": png_b64(save_mask, empty),
            "options": {"direction_deg": 0.0},
        }
        _, body = post_json(f"{server}/jobs", payload)
        record = wait_done(server, body["id"])
        assert record["state"] == "failed"
        assert record["diagnostics"]["stage"] == "load"

    def test_suggest_directions_endpoint(self, server):
        img = make_lattice(px=16, py=40)
        status, body = post_json(
            f"{server}/suggest-directions", {"image": png_b64(save_image, img)}
        )
        assert status == 200
        dirs = body["directions"]
        assert 1 <= len(dirs) <= 3
        ang = np.degrees(np.arctan2(dirs[0]["y"], dirs[0]["x"])) % 180
        assert min(ang, 180 - ang) <= 10

    def test_malformed_requests(self, server):
        status, body = post_json(f"{server}/jobs", {"image": "xx"})
        assert status == 400
        assert body["error"] == "bad_request"
        req = urllib.request.Request(
            f"{server}/jobs", data=b"{not json", headers={"Content-Type": "application/json"}
        )
        try:
            urllib.request.urlopen(req)
            raise AssertionError("expected 400")
        except urllib.error.HTTPError as err:
            assert err.code == 400

    def test_unknown_job_404(self, server):
        status, _ = get(f"{server}/jobs/deadbeef0000")
        assert status == 404

    def test_state_transitions_monotone(self, server):
        payload = job_payload(frame_count=2)
        payload["options"]["fps"] = 10  # distinct hash from other tests
        _, body = post_json(f"{server}/jobs", payload)
        seen = []
        for _ in range(400):
            _, record = get(f"{server}/jobs/{body['id']}")
            if not seen or record["state"] != seen[-1]:
                seen.append(record["state"])
            if record["state"] in ("done", "failed"):
                break
            time.sleep(0.05)
        order = {"queued": 0, "running": 1, "done": 2, "failed": 2}
        ranks = [order[s] for s in seen]
        assert ranks == sorted(ranks)
        assert seen[-1] == "done"
