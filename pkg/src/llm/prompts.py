"""
Prompt Templates

Every prompt the agents send, as jinja2 templates rendered with
``StrictUndefined`` so a missing variable fails loudly instead of silently
producing an empty section.
"""

from typing import Any, Dict

from jinja2 import Environment, StrictUndefined

# Wire names the Manager and the Task Interpreter use for executors.
ITEM_RETRIEVAL_AGENT = "ItemRetrievalAgent"
SEARCHER_AGENT = "SearcherAgent"
INTERACTOR_AGENT = "InteractorAgent"
PLANNER_AGENT = "PlannerAgent"

NOVEL_GUIDANCE_MARKER = "get inspiration from solution description"
HISTORY_MARKER = "history of tasks executed so far"
CORRECTIVE_PLAN_MARKER = "previous plan was invalid"

TEMPLATES: Dict[str, str] = {}

TEMPLATES["agents_instruction"] = """\
Available agents and what each one does:
- ItemRetrievalAgent: takes a recommendation request written as product attributes and returns a list of 10 catalog items ranked by keyword similarity. Needs such as "a sugar-free energy drink" must first be turned into concrete attributes with SearcherAgent. One call serves one target; call it once per target when several targets are recommended.
- SearcherAgent: takes a short query and looks up product attributes that satisfy a need in a knowledge base of attributes and usage, for example "what kind of shorts suit mountain climbing". It only returns attributes, nothing else. Every attribute it returns is guaranteed to be retrievable by ItemRetrievalAgent, so treat its answers as the closest available even when they look imperfect.
- InteractorAgent: writes the final response with one or more recommendation lists. Its input does not need to repeat the recommended items.
{%- if with_planner %}
- PlannerAgent: takes a re-plan goal and regenerates the remaining sub-tasks, in the same format as the initial plan, using what the executed sub-tasks found. Example goal: "Generate a recommendation plan for type A and type B", where the types are specific product names taken from the task history, one recommendation each. The number of product types should not exceed 2 and must not repeat types already recommended. PlannerAgent closes a phase and may ONLY be the last sub-task of a plan.
{%- endif %}"""

TEMPLATES["manager_system"] = """\
You are the manager agent of a conversational recommendation system. You analyse what the user is really asking for, plan sub-tasks for the executor agents, and reuse the high-level reasoning of earlier successful tasks on new problems."""

TEMPLATES["plan_format"] = """\
{
  "user_input": "{{ query }}",
  "main_task": "...",
  "sub_tasks": {
    "task_1": {"content": "...", "agent": "..."},
    "task_2": {"content": "...", "agent": "..."}
  }
}"""

TEMPLATES["terminal_rule"] = """\
{%- if with_planner %}
'content' says what the agent should do and 'agent' names the agent that executes it. PlannerAgent or InteractorAgent must be the last sub-task, may be used only once, and nothing may follow it. Choose InteractorAgent when one plan is enough to finish the task; otherwise choose PlannerAgent to update the plan once enough information has been gathered.
{%- else %}
'content' says what the agent should do and 'agent' names the agent that executes it. The plan must be complete: InteractorAgent must be the last sub-task, used exactly once, and nothing may follow it.
{%- endif %}"""

TEMPLATES["guidance"] = """\
{%- if mode == "matched" %}
Follow this thinking template, distilled from successful work on similar tasks:
Task description: {{ pattern.task_description }}
Solution description: {{ pattern.solution_description }}
Thought template: {{ pattern.thought_template }}
The solution description is guidance at the level of ideas; the thought template is guidance at the level of execution. Decide whether the template fits this request. If it fits, follow it. If it does not, only get inspiration from solution description and imitate the structure of a thought template.
{%- elif mode == "novel" %}
No stored experience matches this request exactly. Here are solution descriptions of the most similar tasks:
{%- for solution in solutions %}
Solution description {{ loop.index }}: {{ solution }}
{%- endfor %}
You can only get inspiration from solution description: reason about which ideas transfer to this request and plan accordingly.
{%- endif %}"""

TEMPLATES["plan_user"] = """\
{{ agents_instruction }}

The user's input is: "{{ query }}".
Based on the user's input, create a task plan in JSON format with sub-tasks, exactly in this shape:
{{ plan_format }}
{{ terminal_rule }}
{{ guidance }}
Return only the JSON plan."""

TEMPLATES["replan_user"] = """\
{{ agents_instruction }}

The user's input is: "{{ query }}".
Here is the {{ history_marker }}:
{{ history }}
The re-plan goal is: "{{ goal }}".
Create the next phase of the plan in the same JSON shape:
{{ plan_format }}
{{ terminal_rule }}
The number of product types in this phase should not exceed 2.
{{ guidance }}
Return only the JSON plan."""

TEMPLATES["plan_corrective"] = """\

Your {{ marker }}: {{ error }}
Produce a corrected plan that satisfies every rule above."""

TEMPLATES["plan_and_solve_user"] = """\
{{ agents_instruction }}

The user's input is: "{{ query }}".
First understand the request and devise a complete plan that solves it end to end, then write that plan out step by step as sub-tasks in this JSON shape:
{{ plan_format }}
{{ terminal_rule }}
Return only the JSON plan."""

TEMPLATES["selector_system"] = """\
You compare a user request with descriptions of previously solved task types and decide which one, if any, describes the same kind of task."""

TEMPLATES["selector_user"] = """\
User request: "{{ query }}"
Candidate task types:
{%- for candidate in candidates %}
- id: {{ candidate.id }}
  task description: {{ candidate.task_description }}
{%- endfor %}
Choose the single candidate whose task description fits the request, or answer "none" if none of them fits.
Return JSON: {"selected": "<candidate id or none>", "reason": "..."}"""

TEMPLATES["distill_system"] = """\
You are a thought pattern updater and you refine reasoning processes so that future tasks go better.
A thought pattern is a high-level idea extracted from a task execution route and has three parts:
1. Task description: abstract and general; says which type of task this is without any task-specific details.
2. Solution description: conceptual guidance for solving this class of problem, the way a domain expert would explain the key to it.
3. Thought template: a step-by-step route for completing the task that guides plan generation. Use "Step N:" lines, grouped under "Phase N:" headings when the task needs more than one planning phase."""

TEMPLATES["distill_user"] = """\
Decide how the old pattern should change given the task route and the expert opinion.
Old pattern: {{ old_pattern }}
Task route: {{ route }}
Expert opinion: {{ opinion }}
Keep the structure and tone of the old pattern where there is one and make the result clear and actionable.
Return JSON: {"task_description": "...", "solution_description": "...", "thought_template": "..."}"""

TEMPLATES["searcher_system"] = """\
You are a searcher agent and you are good at learning previously unknown facts from search results."""

TEMPLATES["searcher_user"] = """\
Target query: {{ query }}
Search results:
{%- for result in results %}
- {{ result.title }}: {{ result.snippet }}
{%- endfor %}
From these results give a specific answer to the query. Output only a keyword combination of no more than 20 words, not a sentence."""

TEMPLATES["retriever_system"] = """\
You are a recommendation assistant and you are good at recognising user preferences."""

TEMPLATES["retriever_user"] = """\
The request is: {{ request }}
Extract the requirements and preferences for {{ domain_noun }}. Fill in this format and output only the filled content:
[{{ domain_noun }} type]; [preference]
The {{ domain_noun }} type holds the basic attributes and gender distinction; every other attribute is a preference. Separate attributes with spaces. Use at most 15 words in total, put basic attributes first, and reflect only what the request states without inferring anything."""

TEMPLATES["interpreter_system"] = """\
You are the task interpreter of a conversational recommendation system. You turn a planned sub-task into the exact input the next agent needs."""

TEMPLATES["interpreter_user"] = """\
{{ agents_instruction }}

Previous task history:
{{ history }}
The current task is "{{ content }}".
The next agent to complete this task is "{{ agent }}".
The previous task output is "{{ previous_output }}".
Write the query for the next agent so that it can complete the task and produce the right output.
Return JSON: {"query": "..."}"""

TEMPLATES["interactor_system"] = """\
You are the response agent of a conversational recommendation system. You read the information gathered so far and write the recommendation response."""

TEMPLATES["interactor_user"] = """\
Previous task history:
{{ history }}
Instruction from the manager: {{ instruction }}
Write a response with one or more lists, each holding exactly 10 recommended items taken from the retrieval results above (id and title). Read the complete history and include every recommendation that was needed, especially when the task ran over several plans.
Label each list in "recommendation" with no more than 5 words naming the product type.
Return JSON: {"lists": [{"recommendation": "...", "items": [{"id": "...", "title": "..."}]}]}"""

TEMPLATES["interactor_corrective"] = """\

Your previous response was rejected: {{ problems }}
Every list needs exactly 10 items and every id must come from the retrieval results in the history."""

TEMPLATES["simulator_system"] = """\
You are a shopper asking an interactive recommender system for something you need, and you only accept products that truly meet that need."""

TEMPLATES["simulator_user"] = """\
Your query, which states your complete requirements, is: {{ query }}
{%- if profile %}
Your preferences as a shopper: {{ profile }}
{%- endif %}
A sample product that meets part of your requirement: {{ sample_product }}
Your requirements in this scenario have these characteristics: {{ scenario_description }}
Picture yourself in this situation. You will receive one or more 10-item recommendation lists; the items of a list share one target, described by the list label.
First decide whether the targets together fully meet your requirements. If they do not, the recommendation is a failure.
Then judge each target: a list whose target misses your requirements is a failure and all its items score 0.
Finally rate each item: 1 if it meets your requirements, 0 if it does not, and 2 if it is exactly the sample product. Among items rated 1, change the score to 0.5 for those that do not match your preferences.
The recommendation lists are:
{%- for list in lists %}
List {{ loop.index }} ({{ list.label }}):
{%- for item in list.items %}
  {{ loop.index }}. [{{ item.id }}] {{ item.title }}
{%- endfor %}
{%- endfor %}
Give your reason first, then the fail tag and one list of 10 numeric scores per recommendation list, in order.
Return JSON: {"reason": "...", "fail": false, "scores": [[1, 0.5, 0, ...]]}"""

TEMPLATES["profile_system"] = """\
You summarise a shopper's {{ domain_noun }} preferences from the items they interacted with."""

TEMPLATES["profile_user"] = """\
Items this user interacted with, oldest first:
{%- for item in items %}
- {{ item }}
{%- endfor %}
Describe the user's basic information and {{ domain_noun }} preferences in two or three sentences. Mention only attributes that appear in these items."""

TEMPLATES["atomic_query_system"] = """\
You write what a shopper would type into a recommender system to find one specific product."""

TEMPLATES["atomic_query_user"] = """\
User profile: {{ profile }}
Target product: {{ target }}
Write one short query, from the user's point of view, that asks for this product without naming its brand or title."""

TEMPLATES["final_query_system"] = """\
You rewrite shopper queries so that they exercise a given interaction scenario."""

TEMPLATES["final_query_user"] = """\
User profile: {{ profile }}
Target product: {{ target }}
Initial query: {{ atomic_query }}
Scenario: {{ scenario }} ({{ scenario_description }})
Rewrite the query so that it fits this scenario and reflects the profile. The query must begin with "{{ opener }}".
Return JSON: {"query": "..."}"""

TEMPLATES["react_system"] = """\
You are a recommendation agent that solves the user's request by interleaving Thought, Action and Observation steps.
{{ agents_instruction }}
Each step, think about what to do next and call exactly one agent. Call InteractorAgent when the recommendation lists are ready; that ends the task."""

TEMPLATES["react_user"] = """\
{%- if reflection %}
Reflection on your previous failed attempt: {{ reflection }}
{% endif %}
The user's input is: "{{ query }}".
Scratchpad so far:
{{ scratchpad }}
Return JSON: {"thought": "...", "action": {"agent": "<agent name>", "input": "..."}}"""

TEMPLATES["reflection_system"] = """\
You review a failed attempt at a recommendation task and write a short self-reflection that will help the next attempt."""

TEMPLATES["reflection_user"] = """\
The user's input was: "{{ query }}".
Your previous trajectory:
{{ scratchpad }}
Outcome: {{ feedback }}
Explain in a few sentences what went wrong and what to do differently.
Return JSON: {"reflection": "..."}"""

_env = Environment(undefined=StrictUndefined, autoescape=False, keep_trailing_newline=False)
_compiled = {name: _env.from_string(source) for name, source in TEMPLATES.items()}


def render(name: str, **context: Any) -> str:
    """Render template ``name``; unknown names raise KeyError."""
    return _compiled[name].render(**context)


def agents_instruction(with_planner: bool = True) -> str:
    return render("agents_instruction", with_planner=with_planner)


def render_guidance(mode: str, pattern=None, solutions=()) -> str:
    """Pattern guidance block: full pattern when matched, solution descriptions when novel."""
    return render("guidance", mode=mode, pattern=pattern, solutions=list(solutions))
