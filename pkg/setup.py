from setuptools import setup
__version__ = "0.1.0"

# Get the long description by reading the README
try:
    readme_content = open("README.md").read()
except IOError:
    readme_content = ""

# Create the actual setup method
setup(name='wavekac',
      version=__version__,
      description='Local and global statistics of monochromatic random waves',
      long_description=readme_content,
      long_description_content_type="text/markdown",
      license="MIT License",
      keywords=["random waves", "kac-rice", "nodal sets", "critical points"],
      packages=['wavekac'],
      python_requires=">=3.8",
      classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: POSIX",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics"
      ],
      install_requires=[
        "ply>=3.4",
        "numpy>=1.20",
        "scipy>=1.6",
        "scikit-image>=0.18",
      ],
      entry_points={
        "console_scripts": ["wavekac = wavekac.cli:main"],
      }
    )
