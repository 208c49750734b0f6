#pragma once

#include <stdexcept>
#include <string>

namespace enrich {

struct error : std::runtime_error {
	error(const std::string &name, const std::string &what)
		: std::runtime_error(name + ": " + what), name(name) {}
	std::string name;
};

#define ENRICH_ERROR(E) \
	struct E : error { \
		explicit E(const std::string &what) : error(#E, what) {} \
	}

ENRICH_ERROR(MalformedXml);
ENRICH_ERROR(UnknownElement);
ENRICH_ERROR(RecordParseError);
ENRICH_ERROR(DuplicateId);
ENRICH_ERROR(TooFewExamples);
ENRICH_ERROR(EmptySpec);
ENRICH_ERROR(EmptyTrainingSet);
ENRICH_ERROR(MissingAlignment);
ENRICH_ERROR(FormatError);
ENRICH_ERROR(GoldCandidateMissing);
ENRICH_ERROR(DegenerateTrainingSet);
ENRICH_ERROR(UnknownIdentifier);
ENRICH_ERROR(EmptyEvalSet);
ENRICH_ERROR(EmptyTree);
ENRICH_ERROR(IdMismatch);
ENRICH_ERROR(IoError);

#undef ENRICH_ERROR

} // namespace enrich
