#pragma once

#include <stdexcept>
#include <string>

namespace cocopipe {

enum class ErrorKind {
    Parse,        // malformed input text
    Schema,       // well-formed input that breaks the data model
    Ingest,       // Label Studio ingestion failures
    Geometry,     // degenerate or inconsistent geometric input
    Codec,        // RLE stream inconsistencies
    Ambiguity,    // no unique answer (outer-keypoint sign test)
    Degeneracy,   // isotropic mask, no principal axis
    Config,       // bad pipeline configuration
    Input,        // out-of-range arguments, dimension mismatches
    Depth,        // no usable depth samples
    Pipeline,     // dataset-level augmentation failures
    Unsupported,  // valid input outside the supported subset
    Io,           // filesystem and image codec failures
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace cocopipe
