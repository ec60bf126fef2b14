use super::banks::{MATERIALS, STYLES};
use super::Stage;

const SELECT: &str = include_str!("../../prompts/select.txt");
const STYLIZE: &str = include_str!("../../prompts/stylize.txt");
const PLAN: &str = include_str!("../../prompts/plan.txt");
const EDIT: &str = include_str!("../../prompts/edit.txt");

const ASSET_SCHEMA: &str = include_str!("../../prompts/asset_proposal.schema.json");
const STYLE_SCHEMA: &str = include_str!("../../prompts/style_assignment.schema.json");
const PLAN_SCHEMA: &str = include_str!("../../prompts/plan_directives.schema.json");
const EDIT_SCHEMA: &str = include_str!("../../prompts/edit_ops.schema.json");

pub(crate) fn system_prompt(stage: Stage) -> String {
    match stage {
        Stage::Select => SELECT.to_string(),
        Stage::Stylize => STYLIZE.replace("{styles}", &STYLES.join(", ")).replace("{materials}", &MATERIALS.join(", ")),
        Stage::Plan => PLAN.to_string(),
        Stage::Edit => EDIT.to_string(),
    }
}

pub(crate) fn task_line(stage: Stage) -> &'static str {
    match stage {
        Stage::Select => "Select the assets for this furniture.",
        Stage::Stylize => "Assign a style and a material to every asset.",
        Stage::Plan => "Plan the arrangement of the assets.",
        Stage::Edit => "Translate the editing instruction into edit operations.",
    }
}

pub(crate) fn schema(stage: Stage) -> &'static str {
    match stage {
        Stage::Select => ASSET_SCHEMA,
        Stage::Stylize => STYLE_SCHEMA,
        Stage::Plan => PLAN_SCHEMA,
        Stage::Edit => EDIT_SCHEMA,
    }
}
