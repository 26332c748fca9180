#pragma once

#include "apsign/theory/finite_alphabet.hpp"
#include "apsign/theory/gaussian.hpp"
#include "apsign/theory/information.hpp"
#include "apsign/theory/rate_token.hpp"
#include "apsign/theory/separation.hpp"
#include "apsign/theory/verify.hpp"
