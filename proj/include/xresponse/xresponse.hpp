#pragma once

#include "xresponse/aggregate.hpp"
#include "xresponse/common.hpp"
#include "xresponse/config.hpp"
#include "xresponse/fit.hpp"
#include "xresponse/ingest.hpp"
#include "xresponse/response.hpp"
#include "xresponse/signs.hpp"
#include "xresponse/synth.hpp"
