/* Copyright 2026 The ctcocr Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef CTCOCR_UTF8_H_
#define CTCOCR_UTF8_H_

#include <string>
#include <string_view>
#include <vector>

namespace ctcocr {

// Strict UTF-8 decoding; malformed or overlong sequences raise a format error.
std::u32string DecodeUtf8(std::string_view bytes);
std::string EncodeUtf8(std::u32string_view text);
std::string EncodeUtf8(char32_t c);

// Unicode White_Space property.
bool IsUnicodeSpace(char32_t c);

// Splits on runs of Unicode whitespace; leading/trailing runs yield no tokens.
std::vector<std::u32string> SplitWords(std::u32string_view text);

}  // namespace ctcocr

#endif  // CTCOCR_UTF8_H_
