use std::sync::Arc;

use super::*;
use crate::aspect::Aspect;
use crate::backend::{HashEmbedder, MockChat, MockRule, MockScript};
use crate::investigator::Source;
use crate::plan::Action;

const PARA: &str = "The method reaches 91% accuracy on the benchmark. The full features were used in the experiments.";
const PAPER: &str = "Section 3 describes the method. It is a gradient boosted tree ensemble trained on all features. \
                     Accuracy is 91% on the held-out split.";

fn plan_text(questions: &[&str]) -> String {
    let mut lines: Vec<String> = questions
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. Investigator: Answer question using the paper: \"{q}\"", i + 1))
        .collect();
    lines.push(format!("{}. Reviewer: Write a review based on the gathered context.", questions.len() + 1));
    lines.join("\n")
}

fn controller_json(actor: &str, action: &str, question: Option<&str>) -> String {
    let params = match question {
        Some(q) => serde_json::json!({ "question": q }),
        None => serde_json::json!({}),
    };
    serde_json::json!({"explanation": "step by step", "actor": actor, "action": action, "parameters": params}).to_string()
}

fn review_json(label: &str, review: &str) -> String {
    serde_json::json!({"reasoning": "because", "label": label, "review": review}).to_string()
}

const GOOD_REVIEW: &str = "The paragraph says 'reaches 91% accuracy on the benchmark' without any variance estimate.";

fn base_script() -> MockScript {
    MockScript::new("I don't know")
        .rule(MockRule::new(Some("planner"), None, plan_text(&["What is the method?", "Which features are used?"])))
        .rule(MockRule::new(
            Some("controller"),
            Some("The next step is:\n\n1."),
            controller_json("Investigator", "Answer question using the paper", Some("What is the method?")),
        ))
        .rule(MockRule::new(
            Some("controller"),
            Some("The next step is:\n\n2."),
            controller_json("Investigator", "Answer question using the paper", Some("Which features are used?")),
        ))
        .rule(MockRule::new(Some("controller"), Some("The next step is:\n\n3."), controller_json("Reviewer", "Write review", None)))
        .rule(MockRule::new(Some("qa"), Some("Question: What is the method?"), "A gradient boosted tree ensemble."))
        .rule(MockRule::new(Some("qa"), Some("Question: Which features are used?"), "I don't know."))
        .rule(MockRule::new(Some("reviewer"), None, review_json("Empirical and Theoretical Soundness", GOOD_REVIEW)))
}

fn pipeline(script: MockScript) -> (Pipeline, Arc<MockChat>) {
    let mock = Arc::new(MockChat::new(script));
    let llm = LlmClient::new(mock.clone());
    (Pipeline::new(llm, Arc::new(HashEmbedder::default())), mock)
}

#[test]
fn full_run_filters_unanswered_context() {
    let (p, mock) = pipeline(base_script());
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    assert_eq!(result.review.label, Aspect::Soundness);
    assert_eq!(result.review.quoted_substring, "reaches 91% accuracy on the benchmark");
    assert_eq!(result.candidate_plans.len(), 4);
    assert_eq!(result.progress.entries.len(), 3);
    assert_eq!(result.context.pairs.len(), 2);
    assert!(result.context.pairs[1].answer.is_no_answer());

    let reviewer = mock.calls_tagged("reviewer");
    assert_eq!(reviewer.len(), 1);
    assert!(reviewer[0].user_message.contains("A gradient boosted tree ensemble."));
    assert!(!reviewer[0].user_message.contains("Which features are used?"));
    assert!(!reviewer[0].user_message.contains("I don't know"));
}

#[test]
fn same_script_gives_identical_json() {
    let a = pipeline(base_script()).0.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    let b = pipeline(base_script()).0.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.trace_ref.len(), 16);
}

#[test]
fn candidate_plans_retry_once_then_drop() {
    let script = MockScript::new("x").rule(MockRule::sequence(
        Some("planner"),
        None,
        vec!["nonsense".into(), plan_text(&["A?"]), plan_text(&["B?"]), "junk".into(), "junk".into(), plan_text(&["C?"])],
    ));
    let (p, mock) = pipeline(script);
    let plans = p.generate_candidate_plans(PARA, 4).unwrap();
    // call 1 fails, retried (A); B; junk then junk -> dropped; C
    assert_eq!(plans.len(), 3);
    assert_eq!(mock.calls_tagged("planner").len(), 6);

    let (p, _) = pipeline(MockScript::new("x").respond("planner", None, "no plan here"));
    assert!(matches!(p.generate_candidate_plans(PARA, 4), Err(OrchestratorError::NoValidPlan { attempts: 8 })));
}

#[test]
fn best_plan_wins_and_ties_go_to_the_first() {
    struct LongestWins;
    impl PlanScorer for LongestWins {
        fn score(&self, _: &str, plan: &str) -> Result<f64, RerankError> {
            Ok(plan.lines().count().min(3) as f64)
        }
    }
    let script = base_script();
    let mut rules = script.rules.clone();
    rules[0] = MockRule::sequence(
        Some("planner"),
        None,
        vec![plan_text(&["What is the method?"]), plan_text(&["What is the method?", "Which features are used?"]), plan_text(&["X?", "Y?"])],
    );
    let (p, _) = pipeline(MockScript { rules, ..script });
    let p = p.with_scorer(Arc::new(LongestWins));
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    assert_eq!(result.plan.steps.len(), 3);
    assert_eq!(result.plan.steps[1].question.as_deref(), Some("Which features are used?"));
    let best = result.candidate_plans.iter().map(|c| c.score).fold(f64::MIN, f64::max);
    assert_eq!(result.candidate_plans.iter().position(|c| c.score == best), Some(1));
}

#[test]
fn controller_skip_is_recorded() {
    let mut script = base_script();
    script.rules[1] = MockRule::new(Some("controller"), Some("The next step is:\n\n1."), controller_json("Controller", "Skip this step", None));
    let (p, mock) = pipeline(script);
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    assert!(matches!(result.progress.entries[0].outcome, StepOutcome::Skipped(_)));
    assert_eq!(result.context.pairs.len(), 1);
    assert!(mock.calls_tagged("qa").iter().all(|c| !c.user_message.contains("Question: What is the method?")));
}

#[test]
fn malformed_controller_replies_degrade_to_literal_execution() {
    let script = MockScript::new("I don't know")
        .rule(MockRule::new(Some("planner"), None, plan_text(&["What is the method?"])))
        .rule(MockRule::new(Some("controller"), None, "{not json"))
        .rule(MockRule::new(Some("qa"), None, "A tree ensemble."))
        .rule(MockRule::new(Some("reviewer"), None, review_json("Substance", GOOD_REVIEW)));
    let (p, mock) = pipeline(script);
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    assert!(result.progress.entries.iter().all(|e| e.degraded));
    assert_eq!(result.progress.entries[0].action.action, ActionKind::AnswerFromPaper);
    let controller = mock.calls_tagged("controller");
    assert_eq!(controller.len(), 6);
    assert!(controller[1].user_message.contains("Your previous reply was rejected"));
    assert!(!controller[0].user_message.contains("Your previous reply was rejected"));
}

#[test]
fn every_executed_step_is_logged_once() {
    let (p, _) = pipeline(base_script());
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    let idx: Vec<usize> = result.progress.entries.iter().map(|e| e.step.index).collect();
    assert_eq!(idx, [1, 2, 3]);
}

#[test]
fn filter_context_examples() {
    let pair = |q: &str, a: Answer| QaPair {
        question: q.into(),
        answer: a,
        source: Source::Paper,
        evidence: Vec::new(),
        url: None,
        cause: None,
    };
    let log = ContextLog {
        paragraph: "p".into(),
        pairs: vec![pair("a", Answer::Text("1".into())), pair("b", Answer::NoAnswer), pair("c", Answer::Text("3".into()))],
    };
    let kept: Vec<_> = filter_context(&log).pairs.into_iter().map(|p| p.question).collect();
    assert_eq!(kept, ["a", "c"]);
    let none = ContextLog { paragraph: "p".into(), pairs: vec![pair("b", Answer::NoAnswer)] };
    assert!(filter_context(&none).pairs.is_empty());
    assert!(filter_context(&ContextLog::new("p")).pairs.is_empty());
}

#[test]
fn fabricated_quote_is_an_error() {
    let mut script = base_script();
    let last = script.rules.len() - 1;
    script.rules[last] =
        MockRule::new(Some("reviewer"), None, review_json("Substance", "The paragraph claims 'quantum annealing beats every baseline ever published'."));
    let (p, _) = pipeline(script);
    assert!(matches!(
        p.run_review(PARA, &Corpus::single("paper", PAPER)),
        Err(OrchestratorError::QuoteNotInParagraph { .. })
    ));
}

#[test]
fn reviewer_retries_then_fails() {
    let (p, mock) = pipeline(MockScript::new("x").respond("reviewer", None, "not json"));
    assert!(matches!(
        p.write_review(PARA, &ContextLog::new(PARA)),
        Err(OrchestratorError::ReviewParseFailure { attempts: 3, .. })
    ));
    assert_eq!(mock.calls_tagged("reviewer").len(), 3);

    let (p, _) = pipeline(MockScript::new("x").rule(MockRule::sequence(
        Some("reviewer"),
        None,
        vec!["oops".into(), review_json("Originality", GOOD_REVIEW)],
    )));
    assert_eq!(p.write_review(PARA, &ContextLog::new(PARA)).unwrap().label, Aspect::Originality);
}

#[test]
fn review_only_plan_runs_on_empty_context() {
    let script = MockScript::new("I don't know")
        .rule(MockRule::new(Some("planner"), None, "1. Reviewer: Write a review based on the gathered context."))
        .rule(MockRule::new(Some("controller"), None, controller_json("Reviewer", "Write review", None)))
        .rule(MockRule::new(Some("reviewer"), None, review_json("Substance", GOOD_REVIEW)));
    let (p, mock) = pipeline(script);
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    assert!(result.context.pairs.is_empty());
    assert!(mock.calls_tagged("reviewer")[0].user_message.contains("Context:\n(none)"));
}

#[test]
fn gpt4_baseline_calls_only_the_reviewer() {
    let (p, mock) = pipeline(base_script());
    let p = p.with_params(OrchestratorParams { variant: Variant::Gpt4, ..OrchestratorParams::default() });
    let result = p.run_review(PARA, &Corpus::default()).unwrap();
    assert_eq!(mock.calls().len(), 1);
    assert!(result.candidate_plans.is_empty());
    assert_eq!(result.plan.steps[0].action, Action::WriteReview);
}

#[test]
fn no_rerank_baseline_draws_one_plan() {
    let (p, mock) = pipeline(base_script());
    let p = p.with_params(OrchestratorParams { variant: Variant::NoRerank, ..OrchestratorParams::default() });
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    assert_eq!(result.candidate_plans.len(), 1);
    assert_eq!(mock.calls_tagged("planner").len(), 1);
}

#[test]
fn cove_answers_closed_book_then_cross_checks() {
    let script = base_script()
        .rule(MockRule::new(Some("qa_closed_book"), Some("What is the method?"), "A neural network."))
        .rule(MockRule::new(Some("qa_closed_book"), None, "All features."))
        .rule(MockRule::new(
            Some("cross_check"),
            None,
            "What is the method?\n* I don't know\n\nWhich features are used?\n* All features.",
        ));
    let (p, mock) = pipeline(script);
    let p = p.with_params(OrchestratorParams { variant: Variant::Cove, ..OrchestratorParams::default() });
    let result = p.run_review(PARA, &Corpus::default()).unwrap();
    assert!(mock.calls_tagged("qa").is_empty());
    assert_eq!(mock.calls_tagged("cross_check").len(), 1);
    assert!(result.context.pairs[0].answer.is_no_answer());
    assert_eq!(result.context.pairs[1].answer.text(), Some("All features."));
    assert!(result.context.pairs.iter().all(|p| p.source == Source::ClosedBook));
    let reviewer = &mock.calls_tagged("reviewer")[0].user_message;
    assert!(!reviewer.contains("A neural network."));
}

#[test]
fn failed_investigator_steps_are_skipped() {
    let mut script = base_script();
    script.rules[1] = MockRule::new(
        Some("controller"),
        Some("The next step is:\n\n1."),
        controller_json("Investigator", "Answer question using Google", Some("Is boosting common?")),
    );
    let (p, _) = pipeline(script);
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    match &result.progress.entries[0].outcome {
        StepOutcome::Skipped(reason) => assert!(reason.contains("web search")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn budget_exhaustion_propagates() {
    let (p, _) = pipeline(base_script());
    let llm = p.llm.clone().with_budget(crate::backend::BudgetLimits { max_calls: 3, ..Default::default() });
    let p = Pipeline { llm: llm.clone(), ..p }.with_investigator(Investigator::new(llm, Arc::new(HashEmbedder::default())));
    assert!(matches!(
        p.run_review(PARA, &Corpus::single("paper", PAPER)),
        Err(OrchestratorError::Backend(BackendError::BudgetExceeded(_)))
    ));
}

#[test]
fn result_is_send_and_serializes() {
    fn assert_send<T: Send + Sync>() {}
    assert_send::<RunResult>();
    assert_send::<Pipeline>();
    let (p, _) = pipeline(base_script());
    let result = p.run_review(PARA, &Corpus::single("paper", PAPER)).unwrap();
    let back: RunResult = serde_json::from_str(&result.to_json()).unwrap();
    assert_eq!(back, result);
}
