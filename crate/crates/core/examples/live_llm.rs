// Certify a question against an OpenAI-compatible endpoint.
//
// Set `CCI_ENDPOINT_URL` (full chat-completions URL), `CCI_MODEL` and
// `CCI_API_KEY`. Without them the example prints a note and exits.

use chance_infer::certify::{certify_and_respond, CertifyConfig};
use chance_infer::generators::{ChatClient, EndpointConfig, LlmSource, VerifierSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (Ok(url), Ok(model), Ok(_)) = (
        std::env::var("CCI_ENDPOINT_URL"),
        std::env::var("CCI_MODEL"),
        std::env::var("CCI_API_KEY"),
    ) else {
        println!("set CCI_ENDPOINT_URL, CCI_MODEL and CCI_API_KEY to run against a live model");
        return Ok(());
    };
    let mut endpoint = EndpointConfig::new(url, model, 0.8);
    endpoint.system_prompt = Some("Answer with a single word.".into());
    let client = ChatClient::new(endpoint)?;
    let verifier = VerifierSpec::contains(["Paris"]).compile()?;
    let mut source = LlmSource::new(client, "What is the capital of France?", verifier);
    let d = certify_and_respond(&mut source, &CertifyConfig::new(0.2, 0.05, 60)?)?;
    println!("{} after {} samples", d.verdict, d.stopping_time);
    if let Some(s) = d.returned_sample {
        println!("answer: {}", s.payload);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
