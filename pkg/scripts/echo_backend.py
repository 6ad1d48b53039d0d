#!/usr/bin/env python3
"""
参考跟踪后端：对每个会话逐帧回显提示框

实现了完整的逐行 JSON 协议，可用于联调与客户端一致性检查：
    python cli.py check-client --command "python scripts/echo_backend.py" \
        --start 0 --end 59 --prompt-box 100,200,40,80
"""
import json
import sys


def expected_frames(request):
    clip = request["clip"]
    prompt = request["prompt_frame"]
    if request["direction"] == "forward":
        return range(prompt, clip["end"] + 1)
    return range(prompt, clip["start"] - 1, -1)


def emit(message):
    sys.stdout.write(json.dumps(message) + "\n")
    sys.stdout.flush()


def serve():
    print("echo backend ready", file=sys.stderr, flush=True)
    for line in sys.stdin:
        if not line.strip():
            continue
        request = json.loads(line)
        kind = request.get("type")
        if kind == "shutdown":
            break
        if kind != "track":
            emit({"type": "error", "message": f"unknown request type {kind!r}"})
            continue
        for frame in expected_frames(request):
            emit({
                "type": "frame",
                "frame": frame,
                "present": True,
                "box": request["prompt_box"],
                "confidence": 1.0,
            })
        emit({"type": "done"})


if __name__ == "__main__":
    serve()
