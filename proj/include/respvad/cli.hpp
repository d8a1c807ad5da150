#pragma once

#include <string>
#include <vector>

namespace respvad {

// Subcommands: synth-video, synth-rp, extract-rp, make-dataset, train,
// predict, eval, report. Returns 0 on success; failures print the failing
// stage to stderr and return nonzero.
int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args);

} // namespace respvad
