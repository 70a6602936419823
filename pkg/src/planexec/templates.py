"""Prompt template catalog.

Each template is a system text plus an optional user text with ``{name}``
placeholder sites. The texts listed in CORE_TEMPLATE_IDS are load-bearing:
their wording is locked verbatim by the regression tests and must not be
reworded. The remaining templates are house glue whose wording may evolve.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


class RenderError(ValueError):
    """A placeholder required by the template was not bound."""


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    system_text: str
    user_text: str | None = None

    def placeholders(self) -> frozenset[str]:
        found = set(_PLACEHOLDER_RE.findall(self.system_text))
        if self.user_text is not None:
            found |= set(_PLACEHOLDER_RE.findall(self.user_text))
        return frozenset(found)

    def render(self, bindings: dict[str, str]) -> list[dict]:
        """Substitute placeholders; no other transformation of template text."""

        def fill(text: str) -> str:
            def sub(m: re.Match) -> str:
                name = m.group(1)
                if name not in bindings:
                    raise RenderError(
                        f"template {self.id!r}: unbound placeholder {name!r}"
                    )
                return bindings[name]

            return _PLACEHOLDER_RE.sub(sub, text)

        messages = [{"role": "system", "content": fill(self.system_text)}]
        if self.user_text is not None:
            messages.append({"role": "user", "content": fill(self.user_text)})
        return messages


CONSTRAINT_GENERATION = PromptTemplate(
    id="constraint_generation",
    system_text=(
        "You are an expert at extracting constraints that MUST NOT be violated "
        "when solving a task instance.\n"
        "\n"
        "You will be given:\n"
        "- A task description\n"
        "- A specific instance of the task\n"
        "\n"
        "Your job:\n"
        "- Output a comprehensive list of constraints that should not be violated "
        "while solving the instance.\n"
        "- Include all explicit hard requirements from the task/instance.\n"
        "- Include any implicit but necessary constraints/assumptions needed to "
        "correctly interpret the instance.\n"
        "- Do not include any solution, schedule, or plan, ONLY constraints.\n"
        "\n"
        "Critical constraint quality requirements:\n"
        "- Make constraints ATOMIC: each numbered item must contain exactly ONE "
        "requirement.\n"
        '- If a requirement contains "and", "or", multiple clauses, or multiple '
        "checks, split it into multiple numbered constraints.\n"
        "- Avoid compound / multi-part constraints, even if the original text is "
        "compound, decompose it.\n"
        '- Avoid solver goals and optimization goals (e.g., "find the best", '
        '"maximize", "minimize"). Only hard validity/legality constraints.\n'
        "\n"
        "Output format requirements (critical):\n"
        "- Output ONLY a numbered list of constraints as plain text "
        "(e.g., '1....\\n2. ...').\n"
        "- No headers, no explanations, no JSON, no code fences, no extra text."
    ),
    user_text="Task:{task}\n\nInstance:\n{instance}\n",
)

CODE_ADD_PRINT = PromptTemplate(
    id="code_add_print",
    system_text=(
        "You are an expert at recognizing and adding print statements to Python "
        "code. You are given a Python code {code}. If the code prints an output, "
        'output "No" without any other text. If the code does not print an '
        "output, add an appropriate print statement to the code to print an "
        "output and return the modified code. Do not add any other text to the "
        "output."
    ),
)

CODE_GENERATION = PromptTemplate(
    id="code_generation",
    system_text=(
        "Let's think step by step. You are given a prompt, which contains context "
        "and a step that needs to be carried out at the end. \n"
        "Write a detailed code in Python that will carry out the step. The code "
        "should use the standard libraries of Python.\n"
        "Use of sympy, scipy or numpy is also allowed.\n"
        "The result of the code implementation should be printed using the Python "
        "print function.\n"
        "Do NOT catch exceptions in your code; let any errors be unhandled.\n"
        "The output should contain only a string of Python code, and the "
        "arguments required for the code. The input text is: {instance}"
    ),
)

CODE_CHECKER = PromptTemplate(
    id="code_checker",
    system_text=(
        "You are an expert at recognizing Python code. You are given an input "
        '{code}. If the input is valid Python code, output "Yes". Else output '
        '"No". Do not add any other text to the output.'
    ),
)

CODE_EXECUTION = PromptTemplate(
    id="code_execution",
    system_text=(
        "You are given a conversation, where at the end of the conversation a "
        "step is supposed to be carried out. \n"
        "The Python code to implement the last step is also given. Execute the "
        "Python code.\n"
        "If you reply with a Function Call, you must carefully provide the "
        "arguments required to run the Python code by considering the input "
        "types for the input in the function description.\n"
        "The arguments you provide must not contain any forward slashes."
    ),
)

RESTRICTION_DECISION = PromptTemplate(
    id="restriction_decision",
    system_text=(
        "You are an expert at classifying whether a single step in plan "
        "execution is restricting the solution space.\n"
        "\n"
        "You will be given:\n"
        "- Task description\n"
        "- Instance of the task\n"
        "- The CURRENT step (instruction and output)\n"
        "\n"
        "Definitions:\n"
        '- "Restricting" means the step output makes a commitment/decision that '
        "narrows possibilities (e.g., assigning values, choosing an option, "
        "fixing an allocation, ruling out options, etc.).\n"
        '- "Not restricting" means the step output only records facts, extracts '
        "information from the input or lists candidates/options.\n"
        "\n"
        "Output format (CRITICAL):\n"
        "Output ONLY 'Yes' or 'No'. Do not output anything else.\n"
        "Facts: {facts}"
    ),
    user_text=(
        "Task: {task}\n"
        "Instance: {instance}\n"
        "CURRENT STEP (instruction + output):{step_text}\n"
    ),
)

CONSTRAINT_RELEVANCE = PromptTemplate(
    id="constraint_relevance",
    system_text=(
        "You are an expert in checking if a given constraint is necessary and "
        "relevant for a specific step in plan execution. You are given a step in "
        "an ongoing plan execution, along with a constraint that needs to be "
        "checked.\n"
        "Your job is to determine if this constraint is necessary and relevant "
        "and should be verified for this specific step. This means that the "
        "constraint should be included if the step output can violate it.\n"
        "\n"
        "Task description: {task}\n"
        "Instance of the task: {instance}\n"
        "Current step number: {step_number}\n"
        "Current step instruction: {step_instruction}\n"
        "Constraint to evaluate: {constraint}\n"
        "\n"
        "Consider:\n"
        "- Does this constraint apply to the output or behavior expected from "
        "this specific step?\n"
        "- Is it meaningful to check this constraint after this step completes?\n"
        "- Is it necessary to check this constraint for this step?\n"
        "- Would checking this constraint help ensure the step was executed "
        "correctly?\n"
        "\n"
        "Only output 'Yes' if the constraint should be necessarily checked for "
        "this step, or 'No' if it is not relevant or necessary to check for this "
        "step. Do not output anything else."
    ),
    user_text=(
        "Should the constraint '{constraint}' be necessarily checked for this "
        "step? Answer only 'Yes' or 'No'. If the constraint is not relevant or "
        "necessary to check for this step, answer 'No'."
    ),
)

CONSTRAINT_REASON = PromptTemplate(
    id="constraint_reason",
    system_text=(
        "You are an expert in checking if a given constraint is violated by the "
        "given step's output during plan execution. You are not a solver, and "
        "you do not care if the plan succeeds or fails. You only care if it "
        "violates the constraints.\n"
        "Given the conversation so far and a constraint, your job is to check if "
        "the given last executed step's output violates the constraint from a "
        "human's perspective.\n"
        "It is critical that you apply human intuition and common sense to check "
        "if the constraint is violated. Think of the constraint being set in the "
        "real world and the step's output being the action taken by a human.\n"
        "In doing so, you will look for the following:\n"
        "- Does the step involve inspection of the problem or does it perform an "
        "action which makes a decision that needs to be verified?\n"
        "- If the step inspects the problem, such as gathering information, "
        "listing options, checking status etc., then the constraint is not "
        'violated and you should output "No", followed by this reason.\n'
        "- If the step performs an action which restricts the solution space, "
        "then compare the output of the step with the constraint and output "
        '"Yes" if the constraint is violated and "No" if the constraint is not '
        "violated followed by the reason.\n"
        "DO NOT TRY TO SOLVE THE PROBLEM, ONLY CHECK IF THE STEP OUTPUT IS LEGAL "
        "UNDER THE GIVEN CONSTRAINT.\n"
        "Ignore any special characters in the last executed step's output.\n"
        "{facts}{current_state}\n"
        "Output ONLY a detailed sentence/paragraph explaining whether the "
        "constraint is violated or not, and why.\n"
        "Do NOT output JSON. Do NOT output 'Yes' or 'No' labels. Print ONLY the "
        "explanation paragraph."
    ),
    user_text=(
        "Check if the following constraint is violated by the last executed "
        "step's output: {constraint}\n"
    ),
)

CONSTRAINT_DECISION = PromptTemplate(
    id="constraint_decision",
    system_text=(
        "You are a strict judge. You will be given:\n"
        "- A constraint\n"
        "- A detailed reason describing whether the constraint is violated or "
        "not\n"
        "\n"
        "Your job is to output ONLY:\n"
        "Yes  (if the constraint is violated)\n"
        "No   (if the constraint is not violated)\n"
        "\n"
        "Do not output anything else."
    ),
    user_text="Constraint:{constraint}\nReason:{reason}\n",
)

STATE_SUMMARIZER = PromptTemplate(
    id="state_summarizer",
    system_text=(
        "You are a state summarizer used ONLY for constraint verification.\n"
        "\n"
        "You will be given:\n"
        "- The instruction for the most recent step\n"
        "- The output produced by that step\n"
        "\n"
        "Your job:\n"
        "- Summarize ONLY the key factual results from this (instruction, "
        "output) pair.\n"
        "- Do NOT propose next actions, alternatives, improvements, or any "
        "solution.\n"
        "- Do NOT infer facts that are not explicitly present in the output.\n"
        "- If the output is empty/unclear, say so.\n"
        "\n"
        "Output requirements:\n"
        "- Output plain text only.\n"
        "- No JSON, no code fences, no headers."
    ),
    user_text="STEP INSTRUCTION:{step_instruction}\nSTEP OUTPUT:{step_output}\n",
)

EXECUTOR_SYSTEM = PromptTemplate(
    id="executor_system",
    system_text=(
        "You will execute a series of steps on a given input.\n"
        "Task: {task}\n"
        "Instance: {instance}.\n"
        "You may be provided a preamble before the steps. Each step may have "
        "constraints. \n"
        "\n"
        "Every time I ask you to execute a step, you will generate just the "
        "exact output for the step without any further explanation. \n"
        "The message with the step will be in the following format:\n"
        "<step><number>number of the step</number><instruction>instruction for "
        "the step</instruction></step>\n"
        "\n"
        "The output of the previous steps will be in the following format:\n"
        "<step><number>number of the step</number><output>output for the "
        "step</output></step>\n"
        "Every time you output a step, you will output the entire step in the "
        "above format.\n"
        "You will never output the next step instructions as an output of a "
        "step.\n"
        "If a step requires you to take an input from a previous step, you will "
        "locate that previous step's output using the number of the step and "
        "output identifier and use it as the input for the current step.\n"
        "\n"
        "{function_descriptions}"
    ),
)

PYTHON_JUDGE = PromptTemplate(
    id="python_judge",
    system_text=(
        "You are asked to judge whether a step at the end of a conversation can "
        "be implemented better as a Python code or by LLM API call. \n"
        "You know that LLMs are good at problems where natural language "
        "processing and creativity are required.\n"
        "You know that LLMs are not good at problems where algorithmic thinking "
        "and mathematical reasoning are required.\n"
        "You know that Python codes are good at problems where algorithmic "
        "thinking and mathematical reasoning are required.\n"
        "You know that Python codes are not good at problems where natural "
        "language processing and creativity are required.\n"
        "You are given a conversation in which a plan is being implemented. The "
        "final step of the input from the user is to be implemented.\n"
        "You will reply with strictly one word 'Yes' or 'No' answer to the "
        "question: Should the final step be implemented in Python?\n"
        "If the answer is 'Yes', output 'Yes'.\n"
        "If the answer is 'No', output 'No'.\n"
        "Do not output anything else."
    ),
)

FORALL_DECOMPOSE = PromptTemplate(
    id="forall_decompose",
    system_text=(
        "You are given a FORALL statement from the user. Below you are given the "
        "associated task, an instance and a chat history. \n"
        "The task is: {task}.\n"
        "The instance is: {instance}.\n"
        "The chat history is: {chat_history}.\n"
        "Your job is to use the task, instance and chat history to find all "
        "items that the FORALL statement iterates over and the task that needs "
        "to be executed for each item.\n"
        "The output should be as a dictionary in Python: "
        '{"items": [item1, item2, item3, ...], "task": "task that needs to be '
        'executed for each item"}'
    ),
    user_text="{step_instruction}",
)

IF_DECOMPOSE = PromptTemplate(
    id="if_decompose",
    system_text=(
        "You are given an if statement. Your task is to separate the if "
        "statement into the condition and the then statement.\n"
        "If the statement tells you to go to a step, the statement should be in "
        "the following format: goto step <step number>.\n"
        "The output should be in the following dictionary format:\n"
        '{"if condition": "condition","then statement": "statement"}'
    ),
    user_text="{step_instruction}",
)

# House glue templates. Their wording is not externally specified and is safe
# to reword; they exist so every model call routes through the catalog.

TOOL_JUDGE = PromptTemplate(
    id="tool_judge",
    system_text=(
        "You are deciding whether a registered tool should be used to implement "
        "the final step of a plan execution conversation.\n"
        "The available tools are described by the following JSON registry:\n"
        "{function_descriptions}\n"
        "Reply with strictly one word 'Yes' if one of the registered tools can "
        "implement the final step, or 'No' otherwise.\n"
        "Do not output anything else."
    ),
)

TOOL_SELECT = PromptTemplate(
    id="tool_select",
    system_text=(
        "You select the single most suitable tool to implement the final step "
        "of a plan execution conversation.\n"
        "The available tools are described by the following JSON registry:\n"
        "{function_descriptions}\n"
        "Reply with exactly one tool name taken from the registry, and nothing "
        "else."
    ),
)

SEMANTIC_VERIFIER = PromptTemplate(
    id="semantic_verifier",
    system_text=(
        "You verify that a step output correctly addresses its step instruction "
        "within an ongoing plan execution conversation.\n"
        "You will be given the conversation, then the final step instruction "
        "and the output produced for it.\n"
        "Reply 'Yes' if the output is a well-formed answer to exactly this "
        "step.\n"
        "Reply 'No' followed by a brief rationale if the output answers a "
        "different step, is empty, or does not address the instruction."
    ),
)

FALLBACK_EXECUTOR = PromptTemplate(
    id="fallback_executor",
    system_text=(
        "You are completing a plan step after repeated failed attempts. The "
        "conversation so far, including the errors encountered, is provided.\n"
        "Produce your best final output for the step. Output only the step "
        "output, without any explanation."
    ),
)

IF_JUDGE = PromptTemplate(
    id="if_judge",
    system_text=(
        "You are a strict judge of conditions during plan execution.\n"
        "You will be given a condition, the instance text, and the conversation "
        "so far. Decide whether the condition holds based on the instance and "
        "the conversation.\n"
        "Instance: {instance}\n"
        "Reply with strictly one word: 'Yes' if the condition holds, 'No' if it "
        "does not. Do not output anything else."
    ),
    user_text="Condition: {condition}\nIs the condition true? Answer only 'Yes' or 'No'.",
)

ANSWER_EQUIVALENCE = PromptTemplate(
    id="answer_equivalence",
    system_text=(
        "You judge whether a produced answer is equivalent to a reference gold "
        "answer for the same problem. Formatting differences do not matter; the "
        "conveyed answer must be the same.\n"
        "Reply with strictly one word 'Yes' or 'No'. Do not output anything "
        "else."
    ),
    user_text="Produced answer: {answer}\nGold answer: {gold}\nAre they equivalent?",
)

CATALOG: dict[str, PromptTemplate] = {
    t.id: t
    for t in (
        CONSTRAINT_GENERATION,
        CODE_ADD_PRINT,
        CODE_GENERATION,
        CODE_CHECKER,
        CODE_EXECUTION,
        RESTRICTION_DECISION,
        CONSTRAINT_RELEVANCE,
        CONSTRAINT_REASON,
        CONSTRAINT_DECISION,
        STATE_SUMMARIZER,
        EXECUTOR_SYSTEM,
        PYTHON_JUDGE,
        FORALL_DECOMPOSE,
        IF_DECOMPOSE,
        TOOL_JUDGE,
        TOOL_SELECT,
        SEMANTIC_VERIFIER,
        FALLBACK_EXECUTOR,
        IF_JUDGE,
        ANSWER_EQUIVALENCE,
    )
}

# Wording locked by regression tests.
CORE_TEMPLATE_IDS = frozenset(
    {
        "constraint_generation",
        "code_add_print",
        "code_generation",
        "code_checker",
        "code_execution",
        "restriction_decision",
        "constraint_relevance",
        "constraint_reason",
        "constraint_decision",
        "state_summarizer",
        "executor_system",
        "python_judge",
        "forall_decompose",
        "if_decompose",
    }
)

# House wording, free to evolve.
HOUSE_TEMPLATE_IDS = frozenset(CATALOG) - CORE_TEMPLATE_IDS


def get_template(template_id: str) -> PromptTemplate:
    try:
        return CATALOG[template_id]
    except KeyError:
        raise KeyError(f"unknown template id: {template_id!r}") from None


def render(template_id: str, bindings: dict[str, str]) -> list[dict]:
    return get_template(template_id).render(bindings)
