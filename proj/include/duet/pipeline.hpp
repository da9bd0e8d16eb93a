#ifndef DUET_PIPELINE_HPP
#define DUET_PIPELINE_HPP

#include "duet/config.hpp"

namespace duet {

// Subcommand drivers. Each returns 0 on success or 2 when individual images
// were skipped; fatal configuration or I/O problems are thrown and mapped to
// exit code 1 by the CLI. All logging goes to stderr; data goes to files.

/// Synthesizes the procedural corpus into corpus_dir.
int cmd_synth(const RunConfig& cfg);

/// Trains every configured detector on the corpus and writes model files
/// plus a training summary into models_dir.
int cmd_train(const RunConfig& cfg);

/// Runs the dual-stream attack over every fake corpus image; writes both
/// candidate PNGs and one metadata record per image under output_dir.
int cmd_attack(const RunConfig& cfg);

/// Scores both candidates per image against the selection classifiers,
/// writes the winning PNGs and the selection report.
int cmd_select(const RunConfig& cfg);

/// Emits the final report: per-image CSV rows for the selected set plus a
/// summary document with per-stream ablation sections.
int cmd_evaluate(const RunConfig& cfg);

} // namespace duet

#endif // DUET_PIPELINE_HPP
