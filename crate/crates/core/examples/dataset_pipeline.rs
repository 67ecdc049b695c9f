//! Build an unverified item bank from a document with a scripted model:
//! concepts, supporting sentences, one item per sentence, experiment filter.

use agq::corpus::{generate_dataset, Stage};
use agq::gateway::{MockGateway, MockScript};

const DOC: &str =
    "Abstract: Surfactant flooding lowers the interfacial tension between oil and water. \
Polymer flooding raises water viscosity and improves sweep. \
Keywords: surfactants; polymer flooding";

fn main() -> anyhow::Result<()> {
    let script = MockScript::new()
        .when_contains("key technical concepts", "1. Surfactants\n2. Polymer flooding")
        .when_contains("concept `Surfactants`", "Surfactant flooding lowers the interfacial tension between oil and water.")
        .when_contains("concept `Polymer flooding`", "Polymer flooding raises water viscosity and improves sweep.")
        .when_contains(
            "Sentence: Surfactant",
            "Question: What does surfactant flooding lower?\nA. Interfacial tension\nB. Temperature\n\
             C. Permeability\nD. Porosity\nAnswer: A\nScenario: theory",
        )
        .when_contains(
            "Sentence: Polymer",
            "Question: How does polymer flooding improve sweep?\nA. It heats oil\nB. It raises water viscosity\n\
             C. It dissolves rock\nD. It lowers pressure\nAnswer: B\nScenario: application",
        )
        .when_contains("Experiment-related:", "Experiment-related: no")
        .when_contains("Experiment-related:", "Experiment-related: no");
    let gateway = MockGateway::new(script);

    let artifacts = generate_dataset(&[DOC.to_string()], &gateway, Stage::Filter)?;
    println!("stages: {:?}", artifacts.completed);
    for c in &artifacts.concepts {
        println!(
            "concept {} ({}): {} sentence(s)",
            c.id,
            c.name,
            c.sentences.len()
        );
    }
    let bank = artifacts.into_bank()?;
    for item in &bank.items {
        println!(
            "{}: {} -> {} [{:?}, experiment: {:?}]",
            item.item_id,
            item.question,
            item.options[item.answer_index],
            item.scenario,
            item.experiment_related
        );
    }
    println!("{} gateway calls", gateway.calls().len());
    Ok(())
}
