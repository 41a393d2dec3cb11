#pragma once

#include <string_view>

namespace debacer::textprep::bundled {

std::string_view stopwords_pt();
std::string_view lemmas_pt();
std::string_view suffixes_pt();

}  // namespace debacer::textprep::bundled
