//! Parsing a drafted plan and checking it against the structural rules.
//!
//! ```text
//! cargo run --example validate_plan
//! ```

use focused_feedback::plan::{parse_plan, parse_plan_lenient, validate_plan};

const GOOD: &str = "\
1. Investigator: Answer question using the paper: \"Which loss is minimised?\"
2. Investigator: Answer question using Google: \"Is this loss standard for ranking?\"
3. Reviewer: Write a review based on the gathered context.";

const BAD: &str = "\
1. Investigator: Answer question using Google: \"Who proposed this loss?\"
2. Investigator: Answer question using the paper: \"Which loss is minimised\"
3. Investigator: Think about the experiments.";

fn main() {
    let plan = parse_plan(GOOD).expect("well-formed plan");
    let report = validate_plan(&plan);
    println!("good plan: {:?}, {} violations", report.verdict, report.violations.len());

    // strict parsing refuses unknown lines, so read the bad plan leniently
    match parse_plan(BAD) {
        Ok(_) => println!("bad plan parsed strictly"),
        Err(e) => println!("strict parse: {e}"),
    }
    let report = validate_plan(&parse_plan_lenient(BAD));
    println!("bad plan: {:?}", report.verdict);
    for v in &report.violations {
        println!("  {:?} step {}: {}", v.rule, v.step_index, v.message);
    }
}
