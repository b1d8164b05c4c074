#pragma once

#include <string_view>

// Prompt template text. `{{Skill Context}}` is replaced at render time; the
// scaffolding around it is subject to keyword substitution (see prompt.hpp),
// the inserted context never is. Treat these as frozen wire-format assets:
// golden transcript tests pin the rendered bytes.

namespace skillbench::templates {

inline constexpr std::string_view kSkillContextPlaceholder = "{{Skill Context}}";

inline constexpr std::string_view kSelectionSystem =
    R"(In order to complete the objective that the user asks of you, you have access to a number of skills.

## Skills System

**Available Skills:**
{{Skill Context}}

## Step-by-Step Process

**ALWAYS follow these exact steps:**

1. **Think step-by-step** about the user's request:
   - What is the main task?
   - Which skill domain does it match?

2. **Skill matching rules:**
   - **Multiple skills**: List names separated by commas (e.g., "langgraph-docs, sales-analytics")
   - **No skill matches**: Use empty list `[]`

3. **Generate response based on skills found:**
   | Skills Found | Message Content |
   |--------------|-----------------|
   | 1+ skills    | "Yes I need to read the skill information first because ..." |
   | No skills    | "I didn't find the right skill." |

**Final Output Format (Strict JSON)**

Your final response must **always** follow this JSON structure:

{
  "Message": "Your complete response to the user query goes here.",
  "Skills": ["List of skills selected to complete the request, e.g., ['sales-analytics','sentiment-analytics']"]
}

## Examples

**User:** "How do I use LangGraph StateGraph?"
**Skills:** ["langgraph-docs"]
**JSON:** `{"Message": "Yes I need to read the skill information first because I need details on StateGraph from LangGraph docs.", "Skills": ["langgraph-docs"]}`

**User:** "Write a poem about cats"
**Skills:** []
**JSON:** `{"Message": "I didn't find the right skill.", "Skills": []}`

**User:** "Write a report about LangGraph usage in sales."
**Skills:** ["langgraph-docs", "sales-analytics"]
**JSON:** `{"Message": "Yes I need to read the skill information first because it involves LangGraph documentation and sales analytics.", "Skills": ["langgraph-docs", "sales-analytics"]}`)";

inline constexpr std::string_view kExecutionSystem =
    R"(In order to complete the objective that the user asks of you, you have access to a number of skills description.

## Skills System
You have access to a skills library that provides specialized capabilities and domain knowledge.

**How to Use Skills:**

1. **Read the skill's full instructions**:
2. **Follow the skill's instructions**: contains step-by-step workflows, best practices, and examples

**When to Use Skills:**
- User's request matches a skill's domain (e.g., "research X" -> web-research skill)
- A skill provides proven patterns for complex tasks

**Example Workflow:**
User: "Can you research the latest developments in quantum computing?"
1. Check available skills description
2. Read the skill
3. Follow the skill's research workflow (search -> organize -> synthesize)
4. Make the final decision.

**Skill Information Collected**

{{Skill Context}}

Remember: Skills make you more capable and consistent. When in doubt, check if a skill exists for the task!

## Output instructions

**Final Output Format (Strict JSON)**

{
  "Message": Your message here.
})";

// Canonical selection-message strings from the protocol table.
inline constexpr std::string_view kSelectionFoundMessagePrefix =
    "Yes I need to read the skill information first because ";
inline constexpr std::string_view kSelectionNotFoundMessage = "I didn't find the right skill.";

}  // namespace skillbench::templates
