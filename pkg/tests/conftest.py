from __future__ import annotations

import pytest

from trajlab.agent import Finish, Round, Search, Trajectory
from trajlab.lm import ScriptedLM, TokenUsage
from trajlab.prompts import ReactExemplar, get_prompt_set
from trajlab.qa import AnswerStyle, Method, QAItem, Task
from trajlab.tools import ScriptedTool


def make_item(
    qid: str = "q1",
    task: Task = Task.HOTPOTQA,
    question: str = "Who?",
    golds: tuple[str, ...] = ("Answer",),
    style: AnswerStyle = AnswerStyle.SPAN,
    choices=None,
) -> QAItem:
    return QAItem(
        question_id=qid,
        task=task,
        question=question,
        gold_answers=golds,
        answer_style=style,
        choices=choices,
    )


def exemplar_item(exemplar: ReactExemplar, task: Task, qid: str) -> QAItem:
    return QAItem(
        question_id=qid,
        task=task,
        question=exemplar.question,
        gold_answers=(exemplar.answer,),
        answer_style=AnswerStyle.YESNO if exemplar.answer in ("yes", "no") else AnswerStyle.SPAN,
    )


def replay_fixtures(exemplar: ReactExemplar, task: Task, qid: str = "replay"):
    """(item, scripted lm, scripted tool) that replay an exemplar episode."""
    return (
        exemplar_item(exemplar, task, qid),
        ScriptedLM(exemplar.scripted_responses()),
        ScriptedTool(exemplar.tool_fixtures()),
    )


def make_trajectory(
    qid: str = "t1",
    question: str = "Who?",
    task: Task = Task.HOTPOTQA,
    method: Method = Method.REACT,
    n_rounds: int = 2,
    answer: str = "Answer",
    reward: int = 1,
    truncated: bool = False,
    thought_prefix: str = "step",
) -> Trajectory:
    rounds = []
    for i in range(n_rounds - 1):
        rounds.append(
            Round(
                thought=f"{thought_prefix} {i + 1} for {qid}",
                action=Search(f"query {i + 1} for {qid}"),
                observation=f"observation {i + 1} for {qid}",
            )
        )
    if truncated:
        rounds.append(Round(thought=f"{thought_prefix} last", action=Search("one more"), observation=None))
        final_answer, reward = None, 0
    else:
        rounds.append(Round(thought=f"{thought_prefix} final for {qid}", action=Finish(answer), observation=None))
        final_answer = answer
    return Trajectory(
        question_id=qid,
        question=question,
        task=task,
        method=method,
        rounds=rounds,
        final_answer=final_answer,
        reward=reward,
        truncated=truncated,
        usage=TokenUsage(10 * n_rounds, 5 * n_rounds),
        wall_time_s=0.5,
    )


@pytest.fixture
def hotpot_react_set():
    return get_prompt_set("hotpotqa-react")
