// Copyright 2026 The scriptline Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Recognizes a single text-line image with a trained model directory.
//
//   recognize_line <config> <image.pgm>
//
// The config is the one used for train-sae / train-hmm; its codebook and
// HMM paths are read from it.

#include <iostream>

#include "scriptline.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: recognize_line <config> <image>\n";
    return 2;
  }
  try {
    using namespace scriptline;
    log::set_level(log::Level::kWarning);
    const PipelineConfig config = load_config(argv[1]);
    const Codebook codebook = load_codebook(config);
    const hmm::RecognitionNetwork net =
        hmm::build_ergodic_network(hmm::load_models(config.resolve(config.hmm_model)), config.insertion_penalty);

    const FrameSequence frames = line_frames(line_descriptors(argv[2], config), codebook, config);
    const hmm::DecodeResult r = hmm::viterbi_decode(net, frames);
    if (!r.ok) {
      std::cerr << "no decoding path for " << frames.size() << " frames\n";
      return 3;
    }
    std::cout << r.text << "\n";
    // Segments are in frame order; frame 0 is the rightmost window.
    for (const auto& seg : r.segments)
      std::cerr << "  '" << net.models[seg.model].label << "' frames " << seg.begin << ".." << seg.end << "\n";
    return 0;
  } catch (const scriptline::Error& e) {
    std::cerr << "recognize_line: " << e.what() << "\n";
    return e.exit_code();
  }
}
