#pragma once

#include <functional>
#include <string_view>

namespace gist {

using WarningSink = std::function<void(std::string_view)>;

// Non-fatal diagnostics (padded PCA components, skipped offline cells, ...).
// Default sink writes "warning: <msg>" to stderr.
void warn(std::string_view message);
WarningSink set_warning_sink(WarningSink sink);

}  // namespace gist
