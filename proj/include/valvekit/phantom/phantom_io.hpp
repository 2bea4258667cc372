#pragma once

#include <filesystem>
#include <string>

#include "valvekit/core/manifest.hpp"
#include "valvekit/phantom/phantom.hpp"

namespace valvekit {

/// Spec from a JSON object whose keys mirror the PhantomSpec fields. Unknown
/// keys are rejected so typos do not silently fall back to defaults.
PhantomSpec phantom_spec_from_json(const std::string& text, const std::string& origin = "phantom spec");
PhantomSpec load_phantom_spec(const std::filesystem::path& path);

std::string phantom_truth_json(const PhantomTruth& truth);

/// Writes frame_NN.nii.gz label files, truth.json and manifest.json into
/// `dir` (created if needed) and returns the manifest.
Manifest save_phantom(const Phantom& phantom, const std::filesystem::path& dir);

}  // namespace valvekit
