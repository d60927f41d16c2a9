#pragma once

#include "clicotea/aligntrain.hpp"
#include "clicotea/common.hpp"
#include "clicotea/config.hpp"
#include "clicotea/corpus.hpp"
#include "clicotea/encoder.hpp"
#include "clicotea/matrix.hpp"
#include "clicotea/pipeline.hpp"
#include "clicotea/tokenizer.hpp"
#include "clicotea/wordalign.hpp"
#include "clicotea/zeroshot.hpp"
