"""Prompt templates for every reasoning role.

The templates are plain-format strings so rendered prompts are byte-stable:
the mock backend keys its pinned responses on a hash of the rendered prompt,
and provenance files must replay identically across runs.
"""
from __future__ import annotations

from .timeline import QAPair

RETRIEVAL_TEMPLATE = """Task:
You are an expert in analyzing video clip descriptions. Your task is to select \
which clip or combination of clips is necessary to answer the given question, \
ensuring the selected clips effectively cover the content of both the question \
and the answer.

Guidelines:
- Carefully read the descriptions to determine which clip(s) provide relevant \
content for the question and the answer.
- Clip descriptions are in chronological order. Use clip number to locate clips \
based on time-related expressions (e.g., "at the beginning of the video" \
suggests a smaller clip number, while "at the end of the video" suggests a \
larger one).
- First, determine if one clip can answer the question or if multiple clips are \
needed. Then, return a list containing the selected clip(s) and an explanation.
- If the question asks about the existence/movement of an object or event, the \
object/action/movement may not exist, meaning you can't find the answer in the \
description, but the question might still provide some clues. You need to find \
the sentence closest to those clues.
- If asked about the whole video description or overall atmosphere, you should \
return all clip numbers.
- If multiple clips provide similar descriptions of the content and any of them \
can be used to answer the question, return all corresponding clips.
- If there are no clues in all descriptions and you cannot answer the question, \
return "None.".
- Important: Avoid including unnecessary clips.

Output Format:
1. Your output should be formed in a JSON file.
2. Only return the Python dictionary string.
For example:
{{"explanation": "...", "clip_num": "One clip: [Clip-2]"}}
{{"explanation": "...", "clip_num": "Multiple clips: [Clip-1, Clip-7, Clip-8]"}}
{{"explanation": "...", "clip_num": "None."}}

Clip Descriptions:
{clips}

{qa}"""

KEY_PHRASE_TEMPLATE = """Combine the question and the answer below into one short \
declarative sentence that states exactly what should be visible in the video. \
Keep every concrete object, action, and attribute; drop anything that is not \
visual evidence. Return only the sentence.

{qa}"""

CAPTION_TEMPLATE = """Describe video clip {clip_ref}.

Focus on whether the clip shows the following, and describe the relevant \
objects, actions, and scene changes in temporal order:
{cue}

Only state what is visible in this clip. Do not guess about other clips."""

VERDICT_TEMPLATE = """Look at video frame {frame_ref}.

{qa}

Does this frame show visual evidence that helps answer the question? \
Important: Respond with "Yes" or "No" only."""

MOTION_TEMPLATE = """Analyze the given QA pair to determine if the question is \
related to speed. Specifically, check if it involves either absolute speed (the \
speed of a specific object) or relative speed (comparing the speed of different \
objects). Provide an output of "Yes" if the question pertains to speed, and \
"No" otherwise. Important: Respond with "Yes" or "No" only.

{qa}"""

NONEXISTENCE_TEMPLATE = """Analyze the given QA pair to determine if the question \
inquires about the existence of an object or action. If it does, and the answer \
is "No" (indicating non-existence), output "Yes". If the question is not about \
existence, or the answer is "Yes" (indicating existence), output "No". \
Important: Respond with "Yes" or "No" only.

{qa}"""

HOLISTIC_TEMPLATE = """Analyze the given QA pair to determine if answering it \
requires watching the video as a whole rather than any specific moment, for \
example a full description, a summary, the number of scenes, or the overall \
atmosphere. Provide an output of "Yes" if it does, and "No" if the answer can \
be localized to specific moments. Important: Respond with "Yes" or "No" only.

{qa}"""

SEMANTIC_TEMPLATE = """Analyze the given QA pair to determine if answering it \
requires recognizing specific visual content such as objects, people, places, \
text, colors, or other appearance cues (rather than judging speed or timing \
alone). Provide an output of "Yes" if it does, and "No" otherwise. Important: \
Respond with "Yes" or "No" only.

{qa}"""


def render_qa(qa: QAPair) -> str:
    lines = [f"Question: {qa.question}"]
    if qa.options:
        lines.append("Options: " + " ".join(qa.options))
    lines.append(f"Answer: {qa.answer}")
    return "\n".join(lines)


def build_key_phrase_prompt(qa: QAPair) -> str:
    return KEY_PHRASE_TEMPLATE.format(qa=render_qa(qa))


def build_caption_prompt(cue: str, clip_ref: str) -> str:
    return CAPTION_TEMPLATE.format(clip_ref=clip_ref, cue=cue)


def build_retrieval_prompt(captions: list[str], qa: QAPair) -> str:
    """Render the clip-retrieval prompt over chronologically ordered captions."""
    clips = "\n".join(f"Clip-{i}: {caption}" for i, caption in enumerate(captions))
    return RETRIEVAL_TEMPLATE.format(clips=clips, qa=render_qa(qa))


def build_verdict_prompt(frame_ref: str, qa: QAPair) -> str:
    return VERDICT_TEMPLATE.format(frame_ref=frame_ref, qa=render_qa(qa))


def build_motion_prompt(qa: QAPair) -> str:
    return MOTION_TEMPLATE.format(qa=render_qa(qa))


def build_nonexistence_prompt(qa: QAPair) -> str:
    return NONEXISTENCE_TEMPLATE.format(qa=render_qa(qa))


def build_holistic_prompt(qa: QAPair) -> str:
    return HOLISTIC_TEMPLATE.format(qa=render_qa(qa))


def build_semantic_prompt(qa: QAPair) -> str:
    return SEMANTIC_TEMPLATE.format(qa=render_qa(qa))
