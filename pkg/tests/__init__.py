from wavekac.predicate import jet_document

# A saddle at (1, -2) seen from the origin
DOC = jet_document([1.0, -2.0], (0.75, [0.0, 0.0], [[-2.0, 0.0], [0.0, 1.0]]),
                   center=[0.0, 0.0])
