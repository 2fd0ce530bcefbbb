"""
Mock chat-completions routes for wayshape.

A local stand-in for a VLM endpoint speaking the chat-completions wire
format. Replies come from a queue of scripted texts when one is loaded,
otherwise the endpoint reads the metaprompt and answers with the oracle
block sequence for the candidates it lists.
"""
import json
import logging
import re
from collections import deque
from typing import Any, Deque, Dict, List, Optional, Tuple, Union

from fastapi import APIRouter, HTTPException, status
from pydantic import BaseModel, Field

from ai.vlm_connector import ProviderError
from ai.waypoint_providers import oracle_sequence
from core.config import Config
from core.geometry import GeometryError, GridSpec

logger = logging.getLogger(__name__)

router = APIRouter()

IMAGE_SIZE = re.compile(r"Image size: (\d+)x(\d+) pixels")
GRID_SIZE = re.compile(r"grid of (\d+) columns x (\d+) rows")
HEIGHT_LEVELS = re.compile(r"Height levels: (\d+)")
CANDIDATE = re.compile(r"^- ([PQ])\d+: \((-?\d+(?:\.\d+)?), (-?\d+(?:\.\d+)?)\)", re.MULTILINE)


class ChatMessage(BaseModel):
    role: str
    content: Union[str, List[Dict[str, Any]], None] = None


class ChatCompletionRequest(BaseModel):
    model: str
    messages: List[ChatMessage] = Field(..., min_length=1)


class ScriptRequest(BaseModel):
    """Replies returned, in order, by the next chat-completions requests."""
    replies: List[str] = Field(..., min_length=1)


class MockEndpointState:
    """Scripted replies and a log of received requests."""

    def __init__(self):
        self.replies: Deque[str] = deque()
        self.requests: List[ChatCompletionRequest] = []

    def script(self, replies: List[str]) -> None:
        self.replies.extend(replies)

    def reset(self) -> None:
        self.replies.clear()
        self.requests.clear()


mock_state = MockEndpointState()


def metaprompt_text(messages: List[ChatMessage]) -> Optional[str]:
    """Text part of the first user message that carries images."""
    for message in messages:
        if message.role != "user" or not isinstance(message.content, list):
            continue
        for part in message.content:
            if part.get("type") == "text":
                return part.get("text", "")
    return None


def parse_metaprompt(text: str) -> Tuple[GridSpec, List[Tuple[float, float]], List[Tuple[float, float]]]:
    """Grid layout and the P/Q candidate pixels listed in a metaprompt."""
    size, grid, levels = IMAGE_SIZE.search(text), GRID_SIZE.search(text), HEIGHT_LEVELS.search(text)
    if not (size and grid and levels):
        raise ProviderError("metaprompt lacks the image size, grid or height level lines")
    spec = GridSpec(int(size[1]), int(size[2]), int(grid[1]), int(grid[2]), int(levels[1]))
    grasp = [(float(u), float(v)) for kind, u, v in CANDIDATE.findall(text) if kind == "P"]
    target = [(float(u), float(v)) for kind, u, v in CANDIDATE.findall(text) if kind == "Q"]
    return spec, grasp, target


def oracle_reply(text: str) -> str:
    grid, grasp, target = parse_metaprompt(text)
    seq = oracle_sequence(grasp, target, grid, Config.ORACLE_Z_LOW, Config.ORACLE_Z_LIFT)
    return f"Grasp the object and carry it to the target.\nblock_sequence: {json.dumps(seq.as_triples())}"


def completion_body(model: str, text: str, index: int) -> Dict[str, Any]:
    return {
        "id": f"chatcmpl-mock-{index}",
        "object": "chat.completion",
        "created": 0,
        "model": model,
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": text},
                "finish_reason": "stop",
            }
        ],
        "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
    }


@router.post("/v1/chat/completions")
async def chat_completions(request: ChatCompletionRequest):
    """Answer one chat-completions request."""
    mock_state.requests.append(request)
    index = len(mock_state.requests)

    if mock_state.replies:
        text = mock_state.replies.popleft()
        logger.debug(f"Mock request {index}: scripted reply")
        return completion_body(request.model, text, index)

    prompt = metaprompt_text(request.messages)
    if prompt is None:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="no metaprompt in the request")
    try:
        text = oracle_reply(prompt)
    except (ProviderError, GeometryError, ValueError) as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    logger.debug(f"Mock request {index}: oracle reply")
    return completion_body(request.model, text, index)


@router.post("/mock/script")
async def load_script(request: ScriptRequest):
    """Queue scripted replies."""
    mock_state.script(request.replies)
    return {"queued": len(mock_state.replies)}


@router.post("/mock/reset")
async def reset_mock():
    mock_state.reset()
    return {"queued": 0, "requests": 0}


@router.get("/mock/stats")
async def mock_stats():
    return {"queued": len(mock_state.replies), "requests": len(mock_state.requests)}
