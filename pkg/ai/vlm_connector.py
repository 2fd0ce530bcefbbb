import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import httpx
from jinja2 import Environment, FileSystemLoader, StrictUndefined
from openai import OpenAI, OpenAIError
from openai.types.chat import ChatCompletionMessageParam

from core.config import Config
from core.geometry import GridSpec, grid_labels
from .annotation import AnnotatedObservation, to_png_base64

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / "templates"
METAPROMPT_TEMPLATE = "metaprompt_v1.j2"

_environment = Environment(
    loader=FileSystemLoader(str(TEMPLATE_DIR)),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    autoescape=False,
)


class ProviderError(RuntimeError):
    """Raised when a waypoint provider cannot produce a valid block sequence."""


def render_metaprompt(annotation: AnnotatedObservation, instruction: str,
                      template: str = METAPROMPT_TEMPLATE) -> str:
    '''
    Fill the metaprompt template with the grid layout and candidate labels.

    Args:
        annotation(AnnotatedObservation): the annotated first observation.
        instruction(str): the language instruction of the task.
        template(str): template file name under ai/templates.
    '''
    grid: GridSpec = annotation.grid
    col_labels, row_labels = grid_labels(grid)
    return _environment.get_template(template).render(
        image_width=grid.image_width,
        image_height=grid.image_height,
        cols=grid.cols,
        rows=grid.rows,
        height_levels=grid.height_levels,
        col_labels=col_labels,
        row_labels=row_labels,
        grasp_candidates=annotation.grasp_candidates,
        target_candidates=annotation.target_candidates,
        instruction=instruction,
    )


class VLMConnector:
    '''
    The class for the vision-language model endpoint.
    '''
    def __init__(self, api_key: Optional[str] = None, base_url: str = Config.VLM_BASE_URL,
                 model: str = Config.VLM_MODEL, timeout: float = Config.VLM_TIMEOUT,
                 http_client: Optional[httpx.Client] = None) -> None:
        '''
        The constructor for the VLM connector.

        Args:
            api_key(str): the api key; read from Config.VLM_API_KEY_ENV when omitted.
            base_url(str): the base url of the chat-completions endpoint.
            model(str): the model name.
            timeout(float): request timeout in seconds.
            http_client(httpx.Client): optional transport, e.g. a test client.
        '''
        self.api_key = api_key or os.getenv(Config.VLM_API_KEY_ENV, "") or "not-set"
        self.base_url = base_url
        self.model = model
        self.client = OpenAI(
            api_key=self.api_key,
            base_url=self.base_url,
            timeout=timeout,
            max_retries=0,
            http_client=http_client,
        )
        self.system_prompt = (
            "You are a robot manipulation planner. You read annotated camera images and answer with "
            "a coarse gripper trajectory as a JSON array of [x, y, z] grid blocks."
        )

    def build_messages(self, annotation: AnnotatedObservation, instruction: str) -> List[ChatCompletionMessageParam]:
        '''
        Build the chat messages: metaprompt text plus both rasters as base64 PNG image parts.
        '''
        content: List[Dict[str, Any]] = [
            {"type": "text", "text": render_metaprompt(annotation, instruction)},
            {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{to_png_base64(annotation.rendered_top)}"}},
            {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{to_png_base64(annotation.rendered_side)}"}},
        ]
        return [
            {"role": "system", "content": self.system_prompt},
            {"role": "user", "content": content},
        ]

    def complete(self, messages: List[ChatCompletionMessageParam]) -> str:
        '''
        Send one chat-completions request.

        Returns:
            str: the text content of the first choice.
        '''
        try:
            response = self.client.chat.completions.create(model=self.model, messages=messages)
        except OpenAIError as e:
            raise ProviderError(f"VLM request to {self.base_url} failed: {e}") from e

        if not response.choices:
            raise ProviderError("VLM response has no choices")
        text = response.choices[0].message.content
        if text is None:
            raise ProviderError("Empty response from VLM")
        logger.debug(f"VLM reply: {json.dumps(text)[:200]}")
        return text

    def set_model(self, model: str) -> None:
        '''
        Set the model to query.

        Args:
            model(str): The model name to use.
        '''
        self.model = model

    def set_system_prompt(self, prompt: str) -> None:
        '''
        Set a custom system prompt.

        Args:
            prompt(str): The system prompt to use.
        '''
        self.system_prompt = prompt
