#pragma once

// Built-in copies of data/relation_map.tsv, data/stopwords_en.txt and data/lemmas_en.tsv.

#include <string_view>

#include "grf/kg_store.hpp"
#include "grf/text.hpp"

namespace grf {

inline constexpr std::string_view kDefaultRelationMap = R"tsv(# ConceptNet 5 relation -> canonical group (17 groups). A third column
# "reverse" swaps head and tail before grouping. DROP discards the relation.
antonym	antonym
distinctfrom	antonym
atlocation	atlocation
locatednear	atlocation
capableof	capableof
causes	causes
causesdesire	causes
motivatedbygoal	causes	reverse
createdby	createdby
desires	desires
hascontext	hascontext
hasproperty	hasproperty
hassubevent	hassubevent
hasfirstsubevent	hassubevent
haslastsubevent	hassubevent
hasprerequisite	hassubevent
entails	hassubevent
mannerof	hassubevent
isa	isa
instanceof	isa
definedas	isa
madeof	madeof
notcapableof	notcapableof
notdesires	notdesires
partof	partof
hasa	partof	reverse
relatedto	relatedto
similarto	relatedto
synonym	relatedto
usedfor	usedfor
receivesaction	receivesaction
derivedfrom	DROP
etymologicallyderivedfrom	DROP
etymologicallyrelatedto	DROP
externalurl	DROP
formof	DROP
nothasproperty	DROP
notusedfor	DROP
obstructedby	DROP
symbolof	DROP
dbpedia/capital	DROP
dbpedia/field	DROP
dbpedia/genre	DROP
dbpedia/genus	DROP
dbpedia/influencedby	DROP
dbpedia/knownfor	DROP
dbpedia/language	DROP
dbpedia/leader	DROP
dbpedia/occupation	DROP
dbpedia/product	DROP
)tsv";

inline constexpr std::string_view kDefaultStopwords = R"txt(a
about
above
after
again
against
all
am
an
and
any
are
as
at
be
because
been
before
being
below
between
both
but
by
can
could
did
do
does
doing
down
during
each
few
for
from
further
had
has
have
having
he
her
here
hers
herself
him
himself
his
how
i
if
in
into
is
it
its
itself
just
me
more
most
my
myself
no
nor
not
now
of
off
on
once
only
or
other
our
ours
ourselves
out
over
own
same
she
should
so
some
such
than
that
the
their
theirs
them
themselves
then
there
these
they
this
those
through
to
too
under
until
up
very
was
we
were
what
when
where
which
while
who
whom
why
will
with
would
you
your
yours
yourself
yourselves
)txt";

inline constexpr std::string_view kDefaultLemmas = R"tsv(# form<TAB>lemma for forms the suffix rules get wrong
went	go
gone	go
goes	go
was	be
were	be
is	be
are	be
been	be
has	have
had	have
did	do
done	do
ate	eat
eaten	eat
ran	run
saw	see
seen	see
made	make
took	take
taken	take
gave	give
given	give
came	come
found	find
thought	think
told	tell
felt	feel
left	leave
kept	keep
bought	buy
brought	bring
caught	catch
taught	teach
fell	fall
held	hold
knew	know
known	know
wrote	write
written	write
drove	drive
driven	drive
flew	fly
flown	fly
swam	swim
sang	sing
began	begin
broke	break
broken	break
chose	choose
froze	freeze
spoke	speak
stole	steal
woke	wake
wore	wear
children	child
men	man
women	woman
people	person
mice	mouse
feet	foot
teeth	tooth
geese	goose
volcanoes	volcano
potatoes	potato
tomatoes	tomato
heroes	hero
leaves	leaf
knives	knife
wives	wife
lives	life
wolves	wolf
shelves	shelf
)tsv";

inline RelationMap default_relation_map() { return RelationMap::parse(kDefaultRelationMap, "built-in relation map"); }

inline WordSet default_stopwords() {
  WordSet s;
  std::size_t start = 0;
  while (start < kDefaultStopwords.size()) {
    auto end = kDefaultStopwords.find('\n', start);
    if (end == std::string_view::npos) end = kDefaultStopwords.size();
    if (end > start) s.insert(std::string(kDefaultStopwords.substr(start, end - start)));
    start = end + 1;
  }
  return s;
}

inline Lemmatizer default_lemmatizer() {
  Lemmatizer l;
  std::size_t start = 0;
  while (start < kDefaultLemmas.size()) {
    auto end = kDefaultLemmas.find('\n', start);
    if (end == std::string_view::npos) end = kDefaultLemmas.size();
    auto line = kDefaultLemmas.substr(start, end - start);
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    auto f = io::split(line, '\t');
    l.add(f.at(0), f.at(1));
  }
  return l;
}

}  // namespace grf
