#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ctfminer {

// Every library failure carries a stable machine-readable code; the service
// maps these codes onto HTTP statuses.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define CTFMINER_DEFINE_ERROR(Name)                                           \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& message) : Error(#Name, message) {}  \
    };

CTFMINER_DEFINE_ERROR(UnknownAdapter)
CTFMINER_DEFINE_ERROR(EmptyDataset)
CTFMINER_DEFINE_ERROR(InvalidEvent)
CTFMINER_DEFINE_ERROR(InvalidConfig)
CTFMINER_DEFINE_ERROR(TemplateError)
CTFMINER_DEFINE_ERROR(InvalidSpec)
CTFMINER_DEFINE_ERROR(UnknownTrainee)
CTFMINER_DEFINE_ERROR(MissingClusters)
CTFMINER_DEFINE_ERROR(KTooLarge)
CTFMINER_DEFINE_ERROR(EmptyInput)
CTFMINER_DEFINE_ERROR(LengthMismatch)
CTFMINER_DEFINE_ERROR(UnknownDataset)
CTFMINER_DEFINE_ERROR(DuplicateId)

#undef CTFMINER_DEFINE_ERROR

/// Input that did not parse under the chosen adapter; one entry per bad record.
class ParseFailure : public Error {
public:
    ParseFailure(const std::string& message, std::vector<std::string> details)
        : Error("ParseError", message), details_(std::move(details)) {}

    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    std::vector<std::string> details_;
};

}  // namespace ctfminer
