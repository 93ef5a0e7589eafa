#pragma once

#include <iosfwd>
#include <string>

#include "fhoi/config.hpp"

namespace fhoi {

// Each command writes its JSON-lines log to `out` (timing goes to stderr so
// reruns stay byte-identical) and returns a process exit code.
int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir, std::ostream& out);
int cmd_train(const RunConfig& cfg, const std::string& data_dir,
              const std::string& ckpt_out, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const std::string& ckpt,
             const std::string& data_dir, const std::string& report_path,
             std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, double tol, std::ostream& out);
int cmd_nominate(const RunConfig& cfg, const std::string& data_dir,
                 std::size_t scene_index, std::ostream& out);
int cmd_export_attention(const RunConfig& cfg, const std::string& data_dir,
                         const std::string& ckpt, std::size_t scene_index,
                         const std::string& out_dir, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, const std::string& data_dir,
               const std::string& csv_path, std::ostream& out);

// Small stack sized so the finite-difference sweep over every parameter
// stays well under a minute.
RunConfig gradcheck_profile();

}  // namespace fhoi
