#pragma once

#include "splitfed/cost_model.hpp"

#include <string>
#include <vector>

namespace splitfed::svg {

/// Log-log plot of model size N against client count K with one polyline
/// per break-even curve. The region above the curves is labelled as split
/// learning's, the region below as federated learning's.
std::string render_break_even(const std::vector<cost::BreakEvenCurve>& curves,
                              const std::string& title);

} // namespace splitfed::svg
