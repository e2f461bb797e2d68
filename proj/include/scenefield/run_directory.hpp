#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "scenefield/pipeline.hpp"

namespace scenefield {

/// Oracle or remote provider as the config asks (the URL environment override applies).
[[nodiscard]] std::unique_ptr<SceneProvider> make_provider(const RunConfig& config);

/// On-disk record of one generation run:
///   config.json                 the config text, byte for byte
///   log.jsonl                   append-only event log (start, fit, view_done, done)
///   views/NNN/*.png|*.pfm       renders, masks, inpainting inputs, images, depths
///   checkpoints/view_NNN.ckpt   grid after each view; final.ckpt at the end
/// The log doubles as the resume state: every view_done event names the files it wrote.
class RunDirectory : public PipelineObserver {
 public:
  /// New run: refuses a directory that already holds a log.
  static RunDirectory create(const std::filesystem::path& root, const std::string& config_text);
  /// Existing run.
  static RunDirectory open(const std::filesystem::path& root);

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }
  [[nodiscard]] std::string config_text() const;

  void on_fit_log(int view, int iteration, const LossTerms& terms) override;
  void on_view_done(const PipelineState& state, const ViewRecord& record) override;

  void log_start(const RunConfig& config);
  /// Writes final.ckpt and the closing log event.
  void finish(const PipelineState& state);
  [[nodiscard]] bool finished() const;

  /// Rebuilds the state after the last completed view; checkpoint hashes are verified.
  [[nodiscard]] PipelineState restore(const RunConfig& config) const;

 private:
  explicit RunDirectory(std::filesystem::path root);
  void append(const std::string& line);

  std::filesystem::path root_;
  std::ofstream log_;
};

struct GenerateResult {
  PipelineState state;
  std::filesystem::path run_dir;
};

/// Loads the config, then runs (or resumes) the pipeline inside config.output_dir. When
/// `provider` is null one is built from the config.
GenerateResult generate_run(const std::filesystem::path& config_path, bool resume,
                            SceneProvider* provider = nullptr);

}  // namespace scenefield
