// The mock article set the demo browses: a handful of short pages whose
// inline links point at each other.  Link ids are assigned in document
// order when a page is rendered.

export type Segment = string | { text: string; to: string };

export interface MockPage {
  id: string;
  title: string;
  paragraphs: Segment[][];
}

export const DEMO_PAGES: MockPage[] = [
  {
    id: "solar-system",
    title: "The Solar System",
    paragraphs: [
      ["The solar system formed about 4.6 billion years ago from the gravitational",
       " collapse of a giant molecular cloud. Most of its mass sits in the ",
       { text: "Sun", to: "sun" },
       ", with the remainder spread over eight planets, among them ",
       { text: "Earth", to: "earth" }, ", ", { text: "Mars", to: "mars" },
       " and the gas giant ", { text: "Jupiter", to: "jupiter" }, "."],
      ["The inner planets are small and rocky. Beyond the orbit of ",
       { text: "Mars", to: "mars" },
       " lies the asteroid belt, and far beyond that the icy bodies of the",
       " Kuiper belt, of which ", { text: "Pluto", to: "pluto" },
       " is the best-known member."],
      ["Between the planets streams the solar wind, a flow of charged particles",
       " leaving the ", { text: "Sun", to: "sun" },
       " at hundreds of kilometres per second."],
    ],
  },
  {
    id: "sun",
    title: "Sun",
    paragraphs: [
      ["The Sun is a G-type main-sequence star containing 99.86% of the mass of the ",
       { text: "solar system", to: "solar-system" },
       ". Its core fuses about 600 million tonnes of hydrogen every second."],
      ["Sunlight takes a little over eight minutes to reach ",
       { text: "Earth", to: "earth" },
       ", where it drives weather, photosynthesis and climate."],
    ],
  },
  {
    id: "earth",
    title: "Earth",
    paragraphs: [
      ["Earth is the third planet from the ", { text: "Sun", to: "sun" },
       " and the only place known to harbour life. Liquid water covers about",
       " 71% of its surface."],
      ["Its single natural satellite, the ", { text: "Moon", to: "moon" },
       ", raises the tides and stabilises the planet's axial wobble."],
      ["Earth's neighbours are cloud-shrouded Venus and the red planet ",
       { text: "Mars", to: "mars" }, "."],
    ],
  },
  {
    id: "moon",
    title: "Moon",
    paragraphs: [
      ["The Moon orbits ", { text: "Earth", to: "earth" },
       " at an average distance of 384,400 km, presenting the same face at all",
       " times because its rotation is tidally locked."],
      ["Its surface is marked by dark basaltic maria and bright ancient highlands,",
       " both scarred by impact craters."],
    ],
  },
  {
    id: "mars",
    title: "Mars",
    paragraphs: [
      ["Mars is the fourth planet from the ", { text: "Sun", to: "sun" },
       ". Iron oxide dust gives it a reddish appearance."],
      ["Its thin atmosphere and evidence of ancient river valleys make it a",
       " prime target in the search for past life beyond ",
       { text: "Earth", to: "earth" }, "."],
      ["The two small moons of Mars, Phobos and Deimos, are likely captured",
       " asteroids from the belt between Mars and ",
       { text: "Jupiter", to: "jupiter" }, "."],
    ],
  },
  {
    id: "jupiter",
    title: "Jupiter",
    paragraphs: [
      ["Jupiter is the largest planet of the ",
       { text: "solar system", to: "solar-system" },
       ", more than twice as massive as all the other planets combined."],
      ["Its Great Red Spot is a storm wider than ", { text: "Earth", to: "earth" },
       " that has raged for at least two centuries."],
    ],
  },
  {
    id: "pluto",
    title: "Pluto",
    paragraphs: [
      ["Pluto is a dwarf planet in the Kuiper belt, smaller than the ",
       { text: "Moon", to: "moon" }, "."],
      ["Discovered in 1930, it was counted as the ninth planet of the ",
       { text: "solar system", to: "solar-system" },
       " until the category of dwarf planets was introduced in 2006."],
    ],
  },
];

// Named page sets selectable via the ?pageset= query parameter.
export const PAGE_SETS: Record<string, MockPage[]> = {
  demo: DEMO_PAGES,
};

export function getPageSet(name: string | null): MockPage[] {
  if (name && name in PAGE_SETS) return PAGE_SETS[name];
  if (name) console.warn(`unknown pageset ${name}, using demo`);
  return DEMO_PAGES;
}

export function pageById(pages: MockPage[], id: string): MockPage | null {
  return pages.find((p) => p.id === id) ?? null;
}

/** Link targets of a page, in document order (index + 1 is the link id). */
export function pageLinks(page: MockPage): { text: string; to: string }[] {
  const links: { text: string; to: string }[] = [];
  for (const para of page.paragraphs) {
    for (const seg of para) {
      if (typeof seg !== "string") links.push(seg);
    }
  }
  return links;
}

/** Every edge must resolve to an existing page and every page needs a link. */
export function validatePageSet(pages: MockPage[]): string[] {
  const ids = new Set(pages.map((p) => p.id));
  const problems: string[] = [];
  if (ids.size !== pages.length) problems.push("duplicate page ids");
  for (const page of pages) {
    const links = pageLinks(page);
    if (links.length === 0) problems.push(`page ${page.id} has no links`);
    for (const link of links) {
      if (!ids.has(link.to)) problems.push(`page ${page.id} links to missing ${link.to}`);
    }
  }
  return problems;
}
