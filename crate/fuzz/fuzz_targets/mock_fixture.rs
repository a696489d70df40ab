#![no_main]

use libfuzzer_sys::fuzz_target;
use narravine_core::genai::{CubeRef, GenAiClient, MockFixture, MockTransport, PromptConfig};
use narravine_core::{StickerId, StoryStep, StoryTranscript};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(fixture) = MockFixture::from_json(text) else { return };
    let mut client = GenAiClient::new(PromptConfig::default(), Box::new(MockTransport::new(fixture)));
    let cube = CubeRef {
        sticker: StickerId::new("koala").unwrap(),
        scene_text: "A grey koala".into(),
        image: None,
    };
    if let Ok(d) = client.describe_sticker(&cube) {
        assert!(d.word_count >= 1 && d.word_count <= 10);
        if let Ok(s) = client.generate_snippet(&StoryTranscript::new(), StoryStep::Opening, &d, 1) {
            assert!(s.word_count >= 1 && s.word_count <= 15);
        }
    }
});
