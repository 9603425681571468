"""Bundled prompt registry: instruction blocks and few-shot exemplars for the
IO / CoT / ReAct prompting styles on each QA task.

Exemplars are stored structured (not as pre-baked strings) so the renderer,
the replay fixtures in tests, and the curation round-trip checks all consume
one source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError
from .qa import Method, Task

REACT_INSTRUCTIONS = (
    "Solve a question answering task with interleaving Thought, Action, Observation steps. "
    "Thought can reason about the current situation, and Action can be two types:\n"
    "(1) search[question], which searches a question on Google and returns a short snippet "
    "containing the answer. Note that sometimes the snippet does not contain the answer, and "
    "some alternative search might be needed.\n"
    "(2) finish[answer], which returns the answer and finishes the task."
)

COT_INSTRUCTIONS = (
    "Solve a question answering task. Reason step by step in a Thought, then give the final "
    "Answer on its own line."
)

IO_INSTRUCTIONS = "Answer the question."

# Lead-in line between the instructions and the few-shot exemplars; omitted
# from zero-shot contexts, which carry no exemplars.
EXAMPLES_INTRO = "Here are some examples."

# Exemplar episodes end on this observation; it is few-shot context only and
# is never emitted into fine-tuning exports.
EPISODE_FINISHED_OBSERVATION = "Episode finished, reward = 1"


@dataclass(frozen=True)
class ReactStep:
    thought: str
    action: str  # rendered action line, e.g. "search[...]" or "finish[...]"
    observation: str


@dataclass(frozen=True)
class ReactExemplar:
    question: str
    steps: tuple[ReactStep, ...]
    answer: str  # payload of the final finish action

    @property
    def round_count(self) -> int:
        return len(self.steps)

    def render(self) -> str:
        lines = [f"Question: {self.question}"]
        for step in self.steps:
            lines.append(f"Thought: {step.thought}")
            lines.append(f"Action: {step.action}")
            lines.append(f"Observation: {step.observation}")
        return "\n".join(lines)

    def scripted_responses(self) -> list[str]:
        """Per-round LM completions that replay this exemplar."""
        return [f"Thought: {s.thought}\nAction: {s.action}" for s in self.steps]

    def tool_fixtures(self) -> dict[str, str]:
        """query -> observation pairs for a scripted search tool."""
        fixtures: dict[str, str] = {}
        for step in self.steps:
            if step.action.startswith("search[") and step.action.endswith("]"):
                fixtures[step.action[len("search["):-1]] = step.observation
        return fixtures


@dataclass(frozen=True)
class CotExemplar:
    question: str
    thought: str
    answer: str

    def render(self) -> str:
        return f"Question: {self.question}\nThought: {self.thought}\nAnswer: {self.answer}"


@dataclass(frozen=True)
class IOExemplar:
    question: str
    answer: str

    def render(self) -> str:
        return f"Question: {self.question}\nAnswer: {self.answer}"


@dataclass(frozen=True)
class PromptSet:
    id: str
    task: Task
    method: Method
    instructions: str
    exemplars: tuple = field(default_factory=tuple)
    examples_intro: str = EXAMPLES_INTRO

    def render_exemplars(self) -> list[str]:
        return [ex.render() for ex in self.exemplars]


_HOTPOTQA_REACT_EXEMPLARS = (
    ReactExemplar(
        question=(
            "What is the elevation range for the area that the eastern sector of the "
            "Colorado orogeny extends into?"
        ),
        steps=(
            ReactStep(
                "I need to first find the eastern sector of the Colorado orogeny extends into "
                "what, then find its elevation range.",
                "search[the eastern sector of the Colorado orogeny extends into what?]",
                "the High Plains",
            ),
            ReactStep(
                "I need to find the elevation range for the High Plains.",
                "search[elevation range of the High Plains?]",
                "around 1,800 to 7,000 ft",
            ),
            ReactStep(
                "I have the answer.",
                "finish[1,800 to 7,000 ft]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="1,800 to 7,000 ft",
    ),
    ReactExemplar(
        question=(
            'Musician and satirist Allie Goertz wrote a song about the "The Simpsons" '
            "character Milhouse, who Matt Groening named after who?"
        ),
        steps=(
            ReactStep(
                "I need to search Milhouse is named after who.",
                "search[Milhouse is named after who?]",
                "U.S. president Richard Nixon",
            ),
            ReactStep(
                "I find the answer.",
                "finish[Richard Nixon]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="Richard Nixon",
    ),
    ReactExemplar(
        question=(
            "Which documentary is about Finnish rock groups, Adam Clayton Powell or "
            "The Saimaa Gesture?"
        ),
        steps=(
            ReactStep(
                "I need to search documentary Adam Clayton Powell and documentary The Saimaa "
                "Gesture to find which is about Finnish rock groups.",
                "search[documentary Adam Clayton Powell]",
                "Adam Clayton Powell (1989). Documentary. The Academy Award-nominated Adam "
                "Clayton Powell delves into the gripping life and career of the most "
                "influential ...",
            ),
            ReactStep(
                "I do not get whether it is about Finnish rock groups. I need to search Adam "
                "Clayton Powell to make sure.",
                "search[Adam Clayton Powell]",
                "Re-elected for nearly three decades, Powell became a powerful national "
                "politician of the Democratic Party, and served as a national spokesman on "
                "civil rights ...",
            ),
            ReactStep(
                "Adam Clayton Powell is a politican, not Finnish rock groups. I need to "
                "search The Saimaa Gesture to make sure.",
                "search[The Saimaa Gesture documentary]",
                "It is a documentary about three Finnish rock groups aboard the steamboat SS "
                "Heinävesi on their tour around Lake Saimaa. The Saimaa Gesture. Directed by, "
                "Aki ...",
            ),
            ReactStep(
                "The Saimaa Gesture is about three Finnish rock groups, so the answer is The "
                "Saimaa Gesture.",
                "finish[The Saimaa Gesture]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="The Saimaa Gesture",
    ),
    ReactExemplar(
        question="What profession does Nicholas Ray and Elia Kazan have in common?",
        steps=(
            ReactStep(
                "I need to search the profession of Nicholas Ray and Elia Kazan, then find "
                "what is common.",
                "search[Nicholas Ray profession]",
                "New York City, U.S.. Occupation(s), Film director, screenwriter, actor. "
                "Years active, 1946–1979. Spouses.",
            ),
            ReactStep(
                "Nicholas Ray is film director, screenwriter, actor. I need to search Elia "
                "Kazan next.",
                "search[Elia Kazan profession]",
                "Occupations. Actor; director; producer; screenwriter. Years active, 1934 - "
                "1976. Spouses. Molly Day Thacher Kazan... (m. 1932, until her death in 1963).",
            ),
            ReactStep(
                "Elia Kazan is actor, director, producer, screenwriter. So the common "
                "profession is actor, director, screenwriter",
                "finish[actor, director, screenwriter]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="actor, director, screenwriter",
    ),
)

_HOTPOTQA_COT_EXEMPLARS = (
    CotExemplar(
        question=(
            "What is the elevation range for the area that the eastern sector of the "
            "Colorado orogeny extends into?"
        ),
        thought=(
            "The eastern sector of Colorado orogeny extends into the High Plains. High "
            "Plains rise in elevation from around 1,800 to 7,000 ft, so the answer is 1,800 "
            "to 7,000 ft."
        ),
        answer="1,800 to 7,000 ft",
    ),
    CotExemplar(
        question=(
            'Musician and satirist Allie Goertz wrote a song about the "The Simpsons" '
            "character Milhouse, who Matt Groening named after who?"
        ),
        thought=(
            "Milhouse was named after U.S. president Richard Nixon, so the answer is "
            "Richard Nixon."
        ),
        answer="Richard Nixon",
    ),
    CotExemplar(
        question=(
            "Which documentary is about Finnish rock groups, Adam Clayton Powell or The "
            "Saimaa Gesture?"
        ),
        thought=(
            "Adam Clayton Powell (film) is a documentary about an African-American "
            "politician, not Finnish rock groups. So the documentary about Finnish rock "
            "groups must instead be The Saimaa Gesture."
        ),
        answer="The Saimaa Gesture",
    ),
    CotExemplar(
        question="What profession does Nicholas Ray and Elia Kazan have in common?",
        thought=(
            "Professions of Nicholas Ray are director, screenwriter, and actor. Professions "
            "of Elia Kazan are director, producer, screenwriter, and actor. So profession "
            "Nicholas Ray and Elia Kazan have in common is director, screenwriter, and actor."
        ),
        answer="director, screenwriter, actor",
    ),
    CotExemplar(
        question="Which magazine was started first Arthur's Magazine or First for Women?",
        thought=(
            "Arthur's Magazine was started in 1844. First for Women was started in 1989. "
            "1844 (Arthur's Magazine) < 1989 (First for Women), so Arthur's Magazine was "
            "started first."
        ),
        answer="Arthur's Magazine",
    ),
    CotExemplar(
        question="Were Pavel Urysohn and Leonid Levin known for the same type of work?",
        thought=(
            "Pavel Urysohn is a mathematician. Leonid Levin is a mathematician and computer "
            "scientist. So Pavel Urysohn and Leonid Levin have the same type of work."
        ),
        answer="Yes",
    ),
)

_HOTPOTQA_IO_EXEMPLARS = (
    IOExemplar(
        "What is the elevation range for the area that the eastern sector of the Colorado "
        "orogeny extends into?",
        "1,800 to 7,000 ft",
    ),
    IOExemplar(
        'Musician and satirist Allie Goertz wrote a song about the "The Simpsons" character '
        "Milhouse, who Matt Groening named after who?",
        "Richard Nixon",
    ),
    IOExemplar(
        "Which documentary is about Finnish rock groups, Adam Clayton Powell or The Saimaa "
        "Gesture?",
        "The Saimaa Gesture",
    ),
    IOExemplar(
        "What profession does Nicholas Ray and Elia Kazan have in common?",
        "director, screenwriter, actor",
    ),
    IOExemplar(
        "Which magazine was started first Arthur's Magazine or First for Women?",
        "Arthur's Magazine",
    ),
    IOExemplar(
        "Were Pavel Urysohn and Leonid Levin known for the same type of work?",
        "Yes",
    ),
)

_MMLU_POND_QUESTION = (
    "Single choice: A person takes buckets of water from the house and begins to add it to "
    "a pond in the yard. After a certain point, the pond\n"
    "A. bloats\n"
    "B. breaks\n"
    "C. sinks\n"
    "D. drowns"
)

_MMLU_COAL_QUESTION = (
    "Single choice: Coal is solid rock that began as organic material that was deposited in "
    "a swamp. The formation of coal suggests that,\n"
    "A. coal is made mostly of skeletal remains of animals.\n"
    "B. coal is formed from magma that has solidified over time.\n"
    "C. it quickly becomes petrified when water is removed.\n"
    "D. geologic processes continue over millions of years."
)

_MMLU_SPACE_QUESTION = (
    "Single choice: A student uses the following characteristics to describe a group of "
    "objects in space.\n"
    "* 200 billion stars\n"
    "* 30 million light years from Earth\n"
    "* 500 light years in diameter\n"
    "Which of the following is the student most likely describing?\n"
    "A. a galaxy\n"
    "B. the universe\n"
    "C. a constellation\n"
    "D. the solar system"
)

_MMLU_REACT_EXEMPLARS = (
    ReactExemplar(
        question=_MMLU_POND_QUESTION,
        steps=(
            ReactStep(
                "After continuously adding water to a pond, the pond will have more water "
                "than it could hold, thus bloats. So the answer is A.",
                "finish[A]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="A",
    ),
    ReactExemplar(
        question=_MMLU_COAL_QUESTION,
        steps=(
            ReactStep(
                "The question is about the formation of coal. I need to first learn how coal "
                "is formed.",
                "search[How is coal formed?]",
                "Coal takes millions of years to form Coal contains the energy stored by "
                "plants that lived hundreds of millions of years ago in swampy forests. "
                "Layers of dirt and rock covered the plants over millions of years. The "
                "resulting pressure and heat turned the plants into the substance we call "
                "coal.",
            ),
            ReactStep(
                "Based on the information, I can check each option. A: coal is made by "
                "plants, not animals, so A is false. B: I have no information about if coal "
                'is formed from magma yet. I could search "is coal formed from magma" to '
                "make sure. C: I have no information about if coal quickly becomes petrified "
                'when water is removed. I could search "does coal quickly become petrified '
                'when water is removed" to make sure. D: Coal takes millions of years to '
                'form, so D is possibly true. I could search "is the formulation of coal a '
                'geologic process" to make sure.',
                "search[is the formulation of coal a geologic process]",
                "It is formed from plant remains that have been compacted, hardened, "
                "chemically altered, and metamorphosed by heat and pressure over geologic "
                "time.",
            ),
            ReactStep(
                "Seems the formulation of coal is over geologic time, so a geologic process. "
                "So the answer is D.",
                "finish[D]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="D",
    ),
    ReactExemplar(
        question=_MMLU_SPACE_QUESTION,
        steps=(
            ReactStep(
                "These options correspond to space systems of different sizes. I could "
                "search what is the diameter of each option to match.",
                "search[what is the diameter of a galaxy]",
                "Most galaxies are 1,000 to 100,000 parsecs in diameter (approximately 3,000 "
                "to 300,000 light years) and are separated by distances on the order of "
                "millions of parsecs (or megaparsecs).",
            ),
            ReactStep(
                "A galaxy is usually 3,000 to 300,000 light years in diameter, which is "
                "slightly more than 500 light years. I should search the diameter of the "
                "universe next.",
                "search[what is the diameter of the universe]",
                "93 billion light-years",
            ),
            ReactStep(
                "The universe is 93 billion light years in diameter, which is much larger "
                "than 500 light years. I should search the diameter of a constellation next.",
                "search[what is the diameter of a constellation]",
                "Its diameter, remarkably, is greater than 10 AU (1.5 billion kilometers!), "
                "large enough to fill the entire inner solar system almost as far out as "
                "Jupiter.",
            ),
            ReactStep(
                "A constellation is usually 10 AU in diameter. I need to convert it into "
                "light years.",
                "search[10 AU to light years]",
                "0.000158125",
            ),
            ReactStep(
                "A constellation is usually 0.000158125 light years in diameter, which is "
                "much smaller than 500 light years. I should search the diameter of the "
                "solar system next.",
                "search[what is the diameter of the solar system?]",
                "Sedna is three times farther away from Earth than Pluto, making it the most "
                "distant observable object known in the solar system. It is 143.73 billion "
                "km from the Sun, thus giving the Solar System a diameter of 287.46 billion "
                "km.",
            ),
            ReactStep(
                "The solar system is 287.46 billion km in diameter. I need to convert it "
                "into light years.",
                "search[287.46 billion km to light years]",
                "0.0303845459748716",
            ),
            ReactStep(
                "A constellation is usually 0.0303845459748716 light years in diameter, "
                "which is much smaller than 500 light years. Given all the information about "
                "diameters, the diameter of a galaxy is closest to 500 light years. So the "
                "answer is A.",
                "finish[A]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="A",
    ),
)

_MMLU_COT_EXEMPLARS = (
    CotExemplar(
        question=_MMLU_POND_QUESTION,
        thought=(
            "Each time the person adds a bucket of water, the level of water in the pond "
            "rises. Of all options, only A. bloats is consistent with the rise of water "
            "level. So the answer is A."
        ),
        answer="A",
    ),
    CotExemplar(
        question=_MMLU_COAL_QUESTION,
        thought=(
            "Let's evaluate each option. A. Coal is mostly composed of plant matter, not the "
            "skeletal remains of animals. Therefore, this option is incorrect. B. Coal is "
            "not formed from magma. Magma that solidifies over time creates igneous rocks, "
            "so this option is also incorrect. C. Petrification is a process by which "
            "organic material is turned into stone. It is not directly related to the "
            "process of coal formation, so this option is incorrect. D. The formation of "
            "coal takes incredibly long periods of time and consists of slow geologic "
            "processes such as sedimentation and metamorphism, which suggests that such "
            "processes continue over millions of years. Therefore, this option is correct. "
            "The answer is D."
        ),
        answer="D",
    ),
    CotExemplar(
        question=_MMLU_SPACE_QUESTION,
        thought=(
            "Let's evaluate each option. A. a galaxy: Possibly, as galaxies do contain "
            "billions of stars and can be millions of light years from Earth. B. the "
            "universe: Unlikely, as the universe is far larger than 30 million light years "
            "and contains more than just 200 billion stars. C. a constellation: Unlikely, as "
            "constellations are patterns of stars seen from Earth and don't have a physical "
            "size or distance associated with them. D. the solar system: Definitely not, as "
            "our solar system only contains one star, our sun. So, the answer is most likely "
            "A. a galaxy."
        ),
        answer="A",
    ),
)

_MMLU_IO_EXEMPLARS = (
    IOExemplar(_MMLU_POND_QUESTION, "A"),
    IOExemplar(_MMLU_COAL_QUESTION, "D"),
    IOExemplar(_MMLU_SPACE_QUESTION, "A"),
)

_STRATEGYQA_REACT_EXEMPLARS = (
    ReactExemplar(
        question=(
            "Yes or no: Will the Albany in Georgia reach a hundred thousand occupants "
            "before the one in New York?"
        ),
        steps=(
            ReactStep(
                "I need to first find the population of Albany, Georgia, then find the "
                "population of Albany, New York, then compare them.",
                "search[what is the current population of Albany, Georgia?]",
                "The current population of Albany, Georgia is 68,181 based on our "
                "projections of the latest US Census estimates.The last official US Census "
                "in 2020 recorded ...",
            ),
            ReactStep(
                "Albany, Georgia has 68,181 occupants in 2020.",
                "search[what is the current population of Albany, New York?]",
                "The current population of Albany, New York is 97,593 based on our "
                "projections of the latest US Census estimates.The last official US Census "
                "in 2020 recorded ...",
            ),
            ReactStep(
                "Albany, New York has 97,593 occupants in 2020, which is larger than "
                "Albany, Georgia. So Albany in Georgia will not reach a hundred thousand "
                "occupants before the one in New York, the answer is no.",
                "finish[no]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="no",
    ),
    ReactExemplar(
        question="Yes or no: Do the anchors on Rede Globo speak Chinese?",
        steps=(
            ReactStep(
                "I need to know what is Rede Globo first.",
                "search[what is Rede Globo?]",
                "TV Globo formerly known as Rede Globo, is a Brazilian free-to-air "
                "television network, launched by media proprietor Roberto Marinho on 26 "
                "April 1965.",
            ),
            ReactStep(
                "Rede Globo is a Brazilian television network, and Brazil is not a "
                "Chinese-speaking country, so anchors on Rede Globo do not speak Chinese.",
                "finish[no]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="no",
    ),
    ReactExemplar(
        question="Yes or no: Would a student of the class of 2017 have amnesia about 9/11?",
        steps=(
            ReactStep(
                "The student's awareness about 9/11 would depend on their age at the time of "
                "the event, and if the age is too young, they would not have direct memory "
                "of the event. So, I need to first know how old is a student from class of "
                "2017",
                "search[when is a student from class of 2017 born?]",
                "The graduates of the class of 2017 were mostly born in 1999. Here's a look "
                "at the world they came up in. They are as old as The Phantom Menace. "
                "Midichlorians, Jar-Jar and pod racing have always been part of the Star "
                "Wars world for them.",
            ),
            ReactStep(
                "If a student is born around 1999, they would have been around 2 years old "
                "during the 9/11 attacks in 2001. I need to what age would have amnesia.",
                "search[what age would have amnesia?]",
                "Although infants use their memories to learn new information, few adults "
                "can remember events in their lives that happened prior to the age of three. "
                "Psychologists at Emory University have now documented that age seven is "
                "when these earliest memories tend to fade into oblivion, a phenomenon known "
                'as "childhood amnesia."',
            ),
            ReactStep(
                "Amnesia happens for events prior to the age of three, so a student of the "
                "class of 2017 would have amnesia about 9/11.",
                "finish[yes]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="yes",
    ),
    ReactExemplar(
        question="Yes or no: Is average number of peas in a pod enough commas for a billion?",
        steps=(
            ReactStep(
                "I need to know the average number of peas in a pod, and the number of "
                "commas for a billion, then compare them.",
                "search[what is the average number of peas in a pod?]",
                "Every pea seed grows into a single pea plant. An average pea plant will "
                "have 6 pods with 8 peas per pod, or 48 peas in total.",
            ),
            ReactStep(
                "The average number of peas in a pod is 8. I need to know how many commas "
                "in a billion.",
                "search[how many commas in a billion?]",
                "A billion is expressed as '1,000,000,000', which amounts to three commas.",
            ),
            ReactStep(
                "The average number of peas in a pod (8 peas) is indeed greater than the "
                "number of commas used in a billion (3 commas), so the answer is yes.",
                "finish[yes]",
                EPISODE_FINISHED_OBSERVATION,
            ),
        ),
        answer="yes",
    ),
)

_STRATEGYQA_COT_EXEMPLARS = (
    CotExemplar(
        question="Yes or no: Do the anchors on Rede Globo speak Chinese?",
        thought=(
            "The anchors on Rede Globo, a Brazilian television network, primarily speak "
            "Portuguese as that is the official language of Brazil. They may have "
            "proficiency in other languages, but Chinese is not likely to be one of the "
            "languages commonly spoken by the anchors on Rede Globo. So the answer is no."
        ),
        answer="no",
    ),
    CotExemplar(
        question=(
            "Yes or no: Will the Albany in Georgia reach a hundred thousand occupants "
            "before the one in New York?"
        ),
        thought=(
            "As of the most recent population estimates, Albany, New York, had a population "
            "of approximately 97,000 residents, while Albany, Georgia, had a population of "
            "around 73,000 residents. Albany, New York, is the capital of the state and is "
            "a major center for business, education, and government. It has a long history "
            "and economic significance, which attracts people to live and work in the area. "
            "On the other hand, Albany, Georgia, while an important regional center, is a "
            "smaller city in comparison. It does not have the same level of economic or "
            "cultural influence as Albany, New York. In conclusion, based on the current "
            "population figures and the different dynamics at play, it is unlikely that "
            "Albany, Georgia, will reach a population of one hundred thousand before "
            "Albany, New York. So the answer is no."
        ),
        answer="no",
    ),
    CotExemplar(
        question="Yes or no: Is average number of peas in a pod enough commas for a billion?",
        thought=(
            "Generally, a typical pea pod contains around 6 to 9 peas. A billion is a very "
            "large number 1,000,000,000 that requires 3 commas, which is less than the "
            "average number of peas in a pod. So the answer is yes."
        ),
        answer="yes",
    ),
    CotExemplar(
        question=(
            "Yes or no: Is the language used in Saint Vincent and the Grenadines rooted in "
            "English?"
        ),
        thought=(
            "Saint Vincent and the Grenadines were once British colonies, and English "
            "became the dominant language during the colonial period. After gaining "
            "independence in 1979, English remained as the official language of the "
            "country, and it has continued to be used in education, government, media, and "
            "daily communication. English has permeated various aspects of society and is "
            "widely spoken by the population, though local dialects and accents may "
            "influence the spoken form of English in the region. So the answer is yes."
        ),
        answer="yes",
    ),
)

_STRATEGYQA_IO_EXEMPLARS = (
    IOExemplar("Yes or no: Do the anchors on Rede Globo speak Chinese?", "no"),
    IOExemplar("Yes or no: Would a student of the class of 2017 have amnesia about 9/11?", "yes"),
    IOExemplar("Yes or no: Is average number of peas in a pod enough commas for a billion?", "yes"),
)


def _build_registry() -> dict[str, PromptSet]:
    sets = [
        PromptSet("hotpotqa-react", Task.HOTPOTQA, Method.REACT, REACT_INSTRUCTIONS, _HOTPOTQA_REACT_EXEMPLARS),
        PromptSet("hotpotqa-cot", Task.HOTPOTQA, Method.COT, COT_INSTRUCTIONS, _HOTPOTQA_COT_EXEMPLARS),
        PromptSet("hotpotqa-io", Task.HOTPOTQA, Method.IO, IO_INSTRUCTIONS, _HOTPOTQA_IO_EXEMPLARS),
        PromptSet("mmlu-react", Task.MMLU, Method.REACT, REACT_INSTRUCTIONS, _MMLU_REACT_EXEMPLARS),
        PromptSet("mmlu-cot", Task.MMLU, Method.COT, COT_INSTRUCTIONS, _MMLU_COT_EXEMPLARS),
        PromptSet("mmlu-io", Task.MMLU, Method.IO, IO_INSTRUCTIONS, _MMLU_IO_EXEMPLARS),
        PromptSet("strategyqa-react", Task.STRATEGYQA, Method.REACT, REACT_INSTRUCTIONS, _STRATEGYQA_REACT_EXEMPLARS),
        PromptSet("strategyqa-cot", Task.STRATEGYQA, Method.COT, COT_INSTRUCTIONS, _STRATEGYQA_COT_EXEMPLARS),
        PromptSet("strategyqa-io", Task.STRATEGYQA, Method.IO, IO_INSTRUCTIONS, _STRATEGYQA_IO_EXEMPLARS),
    ]
    return {ps.id: ps for ps in sets}


REGISTRY: dict[str, PromptSet] = _build_registry()


def get_prompt_set(prompt_set_id: str) -> PromptSet:
    try:
        return REGISTRY[prompt_set_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown prompt set {prompt_set_id!r}; known: {sorted(REGISTRY)}"
        ) from None


def default_prompt_set_id(task: Task, method: Method) -> str:
    """Default prompt set for a (task, method) pair.

    Bamboogle shares HotpotQA's prompts: same open-ended multi-hop format.
    """
    prompt_task = Task.HOTPOTQA if task is Task.BAMBOOGLE else task
    suffix = {Method.IO: "io", Method.COT: "cot", Method.REACT: "react", Method.REFLEXION: "react"}
    method_key = method.base()
    if method_key not in suffix:
        raise ConfigurationError(f"no prompt sets for method {method!r}")
    return f"{prompt_task.value.lower()}-{suffix[method_key]}"
